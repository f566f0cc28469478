"""Config-driven batch generation: sweep shapes x garments x motions and
emit skinned meshes plus mesh-level annotations with a hashed run manifest.

Shape sampling uses a counter-based generator keyed by (seed, sample index)
so results cannot depend on execution order. Two runs of the same config
produce byte-identical output trees.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .assets.library import AssetLibrary, load_body, load_garment, load_motion, scan_library
from .assets.obj import export_obj
from .bvh import MotionClip, parse_bvh
from .geometry import Mesh, Skeleton, joint_world_positions, normalize_name, skeleton_signature
from .retarget import build_retarget_map, retarget_clip
from .shape import apply_shape
from .skinning import SkinBinding, skin_mesh, transfer_weights

OUTPUT_KINDS = ("mesh", "joints3d", "segmentation", "normals")

BODY_PART_GROUPS = (
    "torso",
    "head",
    "left_upper_arm",
    "left_lower_arm",
    "left_hand",
    "right_upper_arm",
    "right_lower_arm",
    "right_hand",
    "left_upper_leg",
    "left_lower_leg",
    "left_foot",
    "right_upper_leg",
    "right_lower_leg",
    "right_foot",
)

_GROUP_ALIASES = {
    "head": ("head",),
    "left_upper_arm": ("leftarm", "upperarml", "leftupperarm", "arml", "larm"),
    "right_upper_arm": ("rightarm", "upperarmr", "rightupperarm", "armr", "rarm"),
    "left_lower_arm": ("leftforearm", "forearml", "lowerarml", "lforearm"),
    "right_lower_arm": ("rightforearm", "forearmr", "lowerarmr", "rforearm"),
    "left_hand": ("lefthand", "handl", "lhand"),
    "right_hand": ("righthand", "handr", "rhand"),
    "left_upper_leg": ("leftupleg", "thighl", "leftthigh", "upperlegl", "lupleg"),
    "right_upper_leg": ("rightupleg", "thighr", "rightthigh", "upperlegr", "rupleg"),
    "left_lower_leg": ("leftleg", "shinl", "lowerlegl", "calfl", "lleg"),
    "right_lower_leg": ("rightleg", "shinr", "lowerlegr", "calfr", "rleg"),
    "left_foot": ("leftfoot", "footl", "lfoot", "lefttoebase", "toel", "ltoe"),
    "right_foot": ("rightfoot", "footr", "rfoot", "righttoebase", "toer", "rtoe"),
}

GARMENT_LABEL_BASE = 100
SEGMENTATION_MAGIC = b"AVSG"
NORMALS_MAGIC = b"AVNR"


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingSpec:
    count: int
    seed: int
    ranges: Optional[np.ndarray] = None  # (m, 2), defaults to basis bounds


@dataclass(frozen=True)
class GenerationConfig:
    body: object  # asset id or {"basis","skeleton","weights"} path dict
    motions: tuple
    output_dir: Path
    shapes: object  # explicit list of vectors or SamplingSpec
    garment_sets: tuple = ((),)
    stride: int = 1
    outputs: tuple = ("mesh", "joints3d")
    mesh_format: str = "obj"  # per-frame OBJs, or one animated GLB per combo
    library: Optional[Path] = None
    retarget_overrides: dict = field(default_factory=dict)
    retarget_aliases: tuple = ()
    retarget_primary_child: dict = field(default_factory=dict)
    retarget_strict: bool = True

    def __post_init__(self):
        if self.stride < 1:
            raise GenerationError(f"stride must be >= 1, got {self.stride}")
        bad = [k for k in self.outputs if k not in OUTPUT_KINDS]
        if bad:
            raise GenerationError(f"unknown output kinds {bad}; valid: {OUTPUT_KINDS}")
        if not self.outputs:
            raise GenerationError("at least one output kind is required")
        if not self.motions:
            raise GenerationError("at least one motion is required")
        if self.mesh_format not in ("obj", "glb"):
            raise GenerationError(f"mesh_format must be 'obj' or 'glb', got {self.mesh_format!r}")


def load_generation_config(source) -> GenerationConfig:
    """Build a config from a JSON file path or an already-parsed dict."""
    if isinstance(source, (str, Path)):
        base = Path(source).parent
        doc = json.loads(Path(source).read_text())
    else:
        base = Path(".")
        doc = dict(source)

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    shapes = doc.get("shapes")
    if isinstance(shapes, dict):
        if "seed" not in shapes:
            raise GenerationError("shape sampling spec requires a 'seed'")
        ranges = shapes.get("ranges")
        shapes = SamplingSpec(
            count=int(shapes["count"]),
            seed=int(shapes["seed"]),
            ranges=None if ranges is None else np.asarray(ranges, dtype=np.float64),
        )
    elif isinstance(shapes, list):
        shapes = [np.asarray(v, dtype=np.float64) for v in shapes]
    else:
        raise GenerationError("'shapes' must be a list of vectors or a sampling spec")

    body = doc.get("body")
    if isinstance(body, dict):
        body = {k: resolve(v) for k, v in body.items()}
    elif not isinstance(body, str):
        raise GenerationError("'body' must be an asset id or a path object")

    motions = doc.get("motions", [])
    resolved_motions = tuple(
        m if isinstance(m, str) and not m.endswith(".bvh") else resolve(m) for m in motions
    )
    library = doc.get("library")
    return GenerationConfig(
        body=body,
        motions=resolved_motions,
        output_dir=resolve(doc["output_dir"]),
        shapes=shapes,
        garment_sets=tuple(tuple(g) for g in doc.get("garments", [[]])),
        stride=int(doc.get("stride", 1)),
        outputs=tuple(doc.get("outputs", ["mesh", "joints3d"])),
        mesh_format=str(doc.get("mesh_format", "obj")),
        library=None if library is None else resolve(library),
        retarget_overrides=dict(doc.get("retarget", {}).get("overrides", {})),
        retarget_aliases=tuple(tuple(g) for g in doc.get("retarget", {}).get("aliases", [])),
        retarget_primary_child=dict(doc.get("retarget", {}).get("primary_child", {})),
        retarget_strict=bool(doc.get("retarget", {}).get("strict", True)),
    )


def sample_shape_vector(spec: SamplingSpec, index: int, bounds: np.ndarray) -> np.ndarray:
    """Deterministic uniform draw for one sample, independent of ordering.

    Each sample gets its own Philox stream keyed by (seed, index); adjacent
    counter values would share blocks and correlate the draws.
    """
    ranges = spec.ranges if spec.ranges is not None else bounds
    key = np.array([spec.seed & 0xFFFFFFFFFFFFFFFF, index], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    u = gen.random(len(ranges))
    return ranges[:, 0] + u * (ranges[:, 1] - ranges[:, 0])


def body_part_labels(skeleton: Skeleton, binding: SkinBinding) -> np.ndarray:
    """Per-vertex body part group index from the dominant-weight joint.

    Joints map to the 14-group convention through the alias table; joints
    without their own group inherit the nearest labeled ancestor (torso at
    the root).
    """
    name_to_group: dict = {}
    for group, names in _GROUP_ALIASES.items():
        for name in names:
            name_to_group[name] = group
    joint_groups = []
    for k, joint in enumerate(skeleton.joints):
        group = name_to_group.get(normalize_name(joint.name))
        if group is None:
            parent = joint.parent
            group = joint_groups[parent] if parent is not None else "torso"
        joint_groups.append(group)
    dominant = binding.indices[np.arange(binding.vertex_count), binding.weights.argmax(axis=1)]
    return np.asarray([BODY_PART_GROUPS.index(joint_groups[j]) for j in dominant], dtype=np.int32)


def _write_segmentation(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(SEGMENTATION_MAGIC)
        f.write(struct.pack("<II", 1, len(labels)))
        f.write(labels.astype("<i4").tobytes())


def _write_normals(path: Path, normals: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(NORMALS_MAGIC)
        f.write(struct.pack("<II", 1, len(normals)))
        f.write(normals.astype("<f4").tobytes())


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class _Run:
    def __init__(self, config: GenerationConfig):
        self.config = config
        self.root = Path(config.output_dir)
        self.files: list = []
        self.failures: list = []

    def emit(self, relative: Path, kind: str) -> None:
        self.files.append({"path": str(relative), "kind": kind})

    def write_manifest(self, combos: list) -> dict:
        for entry in self.files:
            entry["sha256"] = _sha256(self.root / entry["path"])
        self.files.sort(key=lambda e: e["path"])
        manifest = {
            "format": "avatar-forge-run",
            "version": 1,
            "combinations": combos,
            "failures": self.failures,
            "files": self.files,
        }
        text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        (self.root / "manifest.json").write_text(text)
        return manifest


def run_generation(config: GenerationConfig) -> dict:
    """Execute every (shape, garment set, motion) combination.

    A failing combination is recorded under ``failures`` in the manifest and
    does not abort the run. Returns the manifest document.
    """
    library: Optional[AssetLibrary] = None
    if config.library is not None:
        library = scan_library(config.library)

    def need_library() -> AssetLibrary:
        if library is None:
            raise GenerationError("config references library assets but no 'library' is set")
        return library

    if isinstance(config.body, str):
        body = load_body(need_library().get(config.body))
    else:
        from .assets.formats import load_binding, load_skeleton
        from .assets.library import BodyAsset
        from .shape import load_basis

        body = BodyAsset(
            basis=load_basis(config.body["basis"]),
            skeleton=load_skeleton(config.body["skeleton"]),
            binding=load_binding(config.body["weights"]),
        )

    basis = body.basis
    if isinstance(config.shapes, SamplingSpec):
        shape_vectors = [
            sample_shape_vector(config.shapes, i, basis.weight_bounds)
            for i in range(config.shapes.count)
        ]
    else:
        shape_vectors = list(config.shapes)
    shape_weights = [basis.clamp(v) for v in shape_vectors]

    garments_by_id: dict = {}
    for gset in config.garment_sets:
        for gid in gset:
            if gid not in garments_by_id:
                garments_by_id[gid] = load_garment(need_library().get(gid))

    clips: list = []
    for m in config.motions:
        if isinstance(m, str):
            clips.append((m, load_motion(need_library().get(m))))
        else:
            clips.append((Path(m).stem, parse_bvh(Path(m).read_text())))

    run = _Run(config)
    run.root.mkdir(parents=True, exist_ok=True)
    combos: list = []
    body_labels = body_part_labels(body.skeleton, body.binding)

    for si, weights in enumerate(shape_weights):
        body_mesh = apply_shape(basis, weights)
        for gi, gset in enumerate(config.garment_sets):
            gset_sorted = tuple(sorted(gset))
            for mi, (motion_name, clip) in enumerate(clips):
                combo_id = f"shape{si:03d}_set{gi:02d}_mot{mi:02d}"
                combo_dir = run.root / combo_id
                try:
                    produced = _generate_combo(
                        run,
                        combo_dir,
                        combo_id,
                        config,
                        body,
                        body_mesh,
                        body_labels,
                        gset_sorted,
                        garments_by_id,
                        clip,
                    )
                    combos.append(
                        {
                            "id": combo_id,
                            "shape_index": si,
                            "shape_weights": [float(x) for x in weights.values],
                            "garments": list(gset_sorted),
                            "motion": motion_name,
                            "frames": produced,
                        }
                    )
                except Exception as exc:  # noqa: BLE001 - combo isolation is the contract
                    run.failures.append({"id": combo_id, "error": f"{type(exc).__name__}: {exc}"})
    return run.write_manifest(combos)


def _generate_combo(
    run: _Run,
    combo_dir: Path,
    combo_id: str,
    config: GenerationConfig,
    body,
    body_mesh: Mesh,
    body_labels: np.ndarray,
    garment_ids: tuple,
    garments_by_id: dict,
    clip: MotionClip,
) -> list:
    rmap = build_retarget_map(
        clip.skeleton,
        body.skeleton,
        aliases=config.retarget_aliases,
        overrides=config.retarget_overrides,
        primary_child=config.retarget_primary_child,
        strict=config.retarget_strict,
    )
    motion = retarget_clip(clip, body.skeleton, rmap)
    frames = list(range(0, clip.frame_count, config.stride))
    combo_dir.mkdir(parents=True, exist_ok=True)

    garment_objects = []
    for gid in garment_ids:
        asset = garments_by_id[gid]
        binding = asset.binding
        if binding is None:
            binding = transfer_weights(body.basis.rest_mesh, body.binding, asset.mesh)
        elif skeleton_signature(binding.bind_skeleton) != skeleton_signature(body.skeleton):
            raise GenerationError(f"garment {gid!r} is bound to a different skeleton")
        garment_objects.append((gid, asset.mesh, binding))

    if "segmentation" in config.outputs:
        legend = {str(i): g for i, g in enumerate(BODY_PART_GROUPS)}
        seg_path = combo_dir / "body.seg"
        _write_segmentation(seg_path, body_labels)
        run.emit(seg_path.relative_to(run.root), "segmentation")
        for offset, (gid, mesh, _) in enumerate(garment_objects):
            label = GARMENT_LABEL_BASE + offset
            legend[str(label)] = f"garment:{gid}"
            path = combo_dir / f"garment_{gid}.seg"
            _write_segmentation(path, np.full(mesh.vertex_count, label, dtype=np.int32))
            run.emit(path.relative_to(run.root), "segmentation")
        legend_path = combo_dir / "segmentation_legend.json"
        legend_path.write_text(json.dumps(legend, indent=2, sort_keys=True) + "\n")
        run.emit(legend_path.relative_to(run.root), "segmentation")

    if "mesh" in config.outputs and config.mesh_format == "glb":
        from .assets.gltf import export_glb

        scene = [("body", body_mesh, body.binding)] + [
            (f"garment_{gid}", mesh, binding) for gid, mesh, binding in garment_objects
        ]
        strided = [motion.poses[f] for f in frames]
        path = combo_dir / "animation.glb"
        path.write_bytes(
            export_glb(scene, body.skeleton, strided, clip.frame_time * config.stride)
        )
        run.emit(path.relative_to(run.root), "mesh")

    joints_rows: list = []
    produced_frames: list = []
    for f in frames:
        pose = motion.poses[f]
        posed_body = skin_mesh(body_mesh, body.binding, pose)
        posed_garments = [
            (gid, skin_mesh(mesh, binding, pose)) for gid, mesh, binding in garment_objects
        ]
        tag = f"frame{f:04d}"
        if "mesh" in config.outputs and config.mesh_format == "obj":
            path = combo_dir / f"{tag}_body.obj"
            path.write_text(export_obj(posed_body))
            run.emit(path.relative_to(run.root), "mesh")
            for gid, mesh in posed_garments:
                path = combo_dir / f"{tag}_garment_{gid}.obj"
                path.write_text(export_obj(mesh))
                run.emit(path.relative_to(run.root), "mesh")
        if "normals" in config.outputs:
            path = combo_dir / f"{tag}_body.nrm"
            _write_normals(path, posed_body.normals)
            run.emit(path.relative_to(run.root), "normals")
            for gid, mesh in posed_garments:
                path = combo_dir / f"{tag}_garment_{gid}.nrm"
                _write_normals(path, mesh.normals)
                run.emit(path.relative_to(run.root), "normals")
        if "joints3d" in config.outputs:
            positions = joint_world_positions(body.skeleton, pose)
            for name, p in zip(body.skeleton.names, positions):
                joints_rows.append(f"{f},{name},{p[0]:.6f},{p[1]:.6f},{p[2]:.6f}")
        produced_frames.append(f)

    if "joints3d" in config.outputs:
        path = combo_dir / "joints3d.csv"
        path.write_text("frame,joint,x,y,z\n" + "\n".join(joints_rows) + "\n")
        run.emit(path.relative_to(run.root), "joints3d")
    return produced_frames
