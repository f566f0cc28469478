"""Command line interface; thin wrappers over the engine and service."""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click


def friendly_errors(command):
    """Present engine errors as clean messages instead of tracebacks."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ValueError as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper

from .assets.formats import load_skeleton, save_binding
from .assets.library import load_body_manifest, scan_library
from .assets.obj import export_obj, import_obj
from .bvh import clip_from_poses, parse_bvh, write_bvh
from .dataset import load_generation_config, run_generation
from .demo import build_demo_library
from .retarget import build_retarget_map, load_map_config, MapConfig, retarget_clip
from .shape import basis_to_json, build_attribute_basis, load_basis, save_basis
from .skinning import resolve_penetration, transfer_weights


@click.group()
@click.version_option(package_name="avatar-forge")
def main():
    """Character synthesis: blendshape bodies, BVH retargeting, dressing,
    dataset generation and an interactive session service."""


# -- basis ----------------------------------------------------------------


@main.group()
def basis():
    """Blendshape basis tools."""


@basis.command("build")
@click.option("--corpus", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--rest", "rest_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@friendly_errors
def basis_build(corpus: Path, rest_path: Path, out_path: Path):
    """Build a basis from a corpus directory.

    The corpus holds one subdirectory per attribute, each containing OBJ
    samples sharing the rest mesh topology.
    """
    rest = import_obj(rest_path.read_text())
    groups = []
    for subdir in sorted(p for p in corpus.iterdir() if p.is_dir()):
        meshes = [import_obj(p.read_text()) for p in sorted(subdir.glob("*.obj"))]
        if meshes:
            groups.append((subdir.name, meshes))
    if not groups:
        raise click.ClickException(f"no attribute subdirectories with .obj samples under {corpus}")
    built = build_attribute_basis(groups, rest)
    save_basis(built, out_path)
    click.echo(f"wrote {out_path} ({built.attribute_count} attributes, {rest.vertex_count} vertices)")


@basis.command("info")
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--json", "as_json", is_flag=True, help="dump the lossless JSON form")
@friendly_errors
def basis_info(path: Path, as_json: bool):
    loaded = load_basis(path)
    if as_json:
        click.echo(basis_to_json(loaded))
        return
    click.echo(f"vertices:   {loaded.rest_mesh.vertex_count}")
    click.echo(f"faces:      {len(loaded.rest_mesh.faces)}")
    click.echo(f"attributes: {loaded.attribute_count}")
    for name, (lo, hi) in zip(loaded.attribute_names, loaded.weight_bounds):
        click.echo(f"  {name:<12} bounds [{lo:+.3f}, {hi:+.3f}]")


# -- bvh ------------------------------------------------------------------


@main.group()
def bvh():
    """BVH motion file tools."""


@bvh.command("info")
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@friendly_errors
def bvh_info(path: Path):
    clip = parse_bvh(path.read_text())
    skeleton = clip.skeleton
    children: list = [[] for _ in skeleton.joints]
    for k, joint in enumerate(skeleton.joints):
        if joint.parent is not None:
            children[joint.parent].append(k)

    def tree(index: int, depth: int):
        joint = skeleton.joints[index]
        marker = " *" if joint.end_site is not None else ""
        click.echo("  " * depth + f"{joint.name}{marker}")
        for c in children[index]:
            tree(c, depth + 1)

    tree(0, 0)
    click.echo(f"joints:     {len(skeleton)} (* = end site)")
    click.echo(f"channels:   {clip.channels.total} per frame")
    click.echo(f"frames:     {clip.frame_count}")
    click.echo(f"frame time: {clip.frame_time:.6f} s ({1.0 / clip.frame_time:.2f} fps)")


# -- retarget ---------------------------------------------------------------


@main.command("retarget")
@click.option("--bvh", "bvh_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--target", "target_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="target skeleton JSON")
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="retarget map JSON (overrides / aliases / primary_child)")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path),
              help="output .bvh or .avposes")
@friendly_errors
def retarget_command(bvh_path: Path, target_path: Path, map_path: Path, out_path: Path):
    """Transfer a BVH clip onto a target skeleton."""
    clip = parse_bvh(bvh_path.read_text())
    target = load_skeleton(target_path)
    config = load_map_config(map_path) if map_path else MapConfig()
    rmap = build_retarget_map(
        clip.skeleton,
        target,
        aliases=config.aliases,
        overrides=config.overrides,
        primary_child=config.primary_child,
        strict=config.strict,
    )
    motion = retarget_clip(clip, target, rmap)
    if out_path.suffix == ".bvh":
        out_clip = clip_from_poses(target, motion.poses, motion.frame_time)
        out_path.write_text(write_bvh(out_clip))
    else:
        from .poses_io import save_poses

        save_poses(motion, out_path)
    click.echo(
        f"retargeted {clip.frame_count} frames onto {len(target)} joints "
        f"(scale {rmap.scale:.4f}, {len(rmap.pairs)} bone pairs) -> {out_path}"
    )


# -- garments ---------------------------------------------------------------


@main.group()
def garment():
    """Garment preparation."""


@garment.command("prepare")
@click.option("--body", "body_manifest", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="body-basis manifest.json")
@click.option("--cloth", "cloth_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--id", "garment_id", default=None, help="asset id (defaults to the cloth file stem)")
@click.option("--epsilon", type=float, default=0.002, show_default=True)
@friendly_errors
def garment_prepare(body_manifest: Path, cloth_path: Path, out_dir: Path, garment_id: str, epsilon: float):
    """Transfer skin weights to a cloth mesh and push it outside the body."""
    body = load_body_manifest(body_manifest)
    cloth = import_obj(cloth_path.read_text())
    resolved = resolve_penetration(body.basis.rest_mesh, cloth, epsilon=epsilon)
    binding = transfer_weights(body.basis.rest_mesh, body.binding, resolved)
    garment_id = garment_id or cloth_path.stem
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "mesh.obj").write_text(export_obj(resolved))
    save_binding(binding, out_dir / "weights.json")
    manifest = {
        "id": garment_id,
        "kind": "garment",
        "name": garment_id,
        "files": {"mesh": "mesh.obj", "weights": "weights.json"},
        "epsilon": epsilon,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    click.echo(f"prepared garment {garment_id!r} in {out_dir}")


# -- assets -----------------------------------------------------------------


@main.group()
def assets():
    """Asset library tools."""


@assets.command("scan")
@click.argument("root", type=click.Path(exists=True, file_okay=False, path_type=Path))
@friendly_errors
def assets_scan(root: Path):
    library = scan_library(root)
    if not library.entries:
        click.echo("empty catalogue")
        return
    for entry in library.entries:
        click.echo(f"{entry.id:<16} {entry.kind:<12} {entry.name}")
    click.echo(f"{len(library)} assets")


# -- dataset generation -------------------------------------------------------


@main.command("generate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@friendly_errors
def generate(config_path: Path):
    """Run a batch generation sweep from a JSON config."""
    config = load_generation_config(config_path)
    manifest = run_generation(config)
    ok = len(manifest["combinations"])
    failed = len(manifest["failures"])
    click.echo(f"{ok} combinations, {len(manifest['files'])} files, {failed} failures")
    if failed:
        for failure in manifest["failures"]:
            click.echo(f"  FAILED {failure['id']}: {failure['error']}", err=True)
        sys.exit(1)


# -- demo assets --------------------------------------------------------------


@main.command("demo")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--subdivisions", type=int, default=3, show_default=True,
              help="body sphere subdivision level")
@friendly_errors
def demo(out_dir: Path, subdivisions: int):
    """Build the synthetic demo asset library."""
    build_demo_library(out_dir, subdivisions=subdivisions)
    library = scan_library(out_dir)
    click.echo(f"built demo library with {len(library)} assets in {out_dir}")


# -- service -------------------------------------------------------------------


@main.command("serve")
@click.option("--assets", "assets_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="static UI bundle directory (e.g. frontend/dist)")
def serve(assets_dir: Path, host: str, port: int, ui_dir: Path):
    """Serve the session API (and the studio UI when a bundle is given)."""
    import uvicorn

    from .service import create_app

    default_ui = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir is None and default_ui.is_dir():
        ui_dir = default_ui
    app = create_app(assets_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
