"""Asset library: manifest discovery, validation and typed loaders.

A library is a directory tree; every ``manifest.json`` below the root
declares one asset (body basis, garment or motion clip) with paths relative
to the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..bvh import MotionClip, parse_bvh
from ..geometry import Skeleton
from ..shape import BlendShapeBasis, load_basis
from ..skinning import GarmentAsset, SkinBinding
from .formats import AssetFormatError, load_binding, load_skeleton
from .obj import import_obj

KINDS = ("body-basis", "garment", "motion")
MANIFEST_NAME = "manifest.json"

REQUIRED_FILES = {
    "body-basis": ("basis", "skeleton", "weights"),
    "garment": ("mesh",),
    "motion": ("bvh",),
}


class CatalogueError(ValueError):
    """One or more library manifests are invalid; lists every offender."""

    def __init__(self, problems):
        self.problems = tuple(problems)
        super().__init__("library scan failed:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True)
class AssetEntry:
    id: str
    kind: str
    name: str
    directory: Path
    files: dict
    textures: dict = field(default_factory=dict)
    epsilon: Optional[float] = None
    thumbnail: Optional[Path] = None


@dataclass(frozen=True)
class AssetLibrary:
    root: Path
    entries: tuple

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, asset_id: str) -> AssetEntry:
        for entry in self.entries:
            if entry.id == asset_id:
                return entry
        raise KeyError(asset_id)

    def by_kind(self, kind: str) -> tuple:
        return tuple(e for e in self.entries if e.kind == kind)


def _parse_manifest(path: Path, problems: list) -> Optional[AssetEntry]:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        problems.append(f"{path}: unreadable manifest ({exc})")
        return None
    if not isinstance(doc, dict):
        problems.append(f"{path}: manifest must be a JSON object")
        return None
    asset_id = doc.get("id")
    kind = doc.get("kind")
    if not isinstance(asset_id, str) or not asset_id:
        problems.append(f"{path}: missing or empty 'id'")
        return None
    if kind not in KINDS:
        problems.append(f"{path}: kind {kind!r} not one of {KINDS}")
        return None
    directory = path.parent
    files = {}
    raw_files = doc.get("files", {})
    if not isinstance(raw_files, dict):
        problems.append(f"{path}: 'files' must be an object")
        return None
    for role, rel in raw_files.items():
        files[role] = directory / rel
    missing_roles = [r for r in REQUIRED_FILES[kind] if r not in files]
    if missing_roles:
        problems.append(f"{path}: asset {asset_id!r} missing file roles {missing_roles}")
        return None
    textures = {}
    for name, rel in (doc.get("textures") or {}).items():
        textures[name] = directory / rel
    thumbnail = directory / doc["thumbnail"] if doc.get("thumbnail") else None
    missing = [
        str(p) for p in list(files.values()) + list(textures.values()) if not p.is_file()
    ]
    if thumbnail is not None and not thumbnail.is_file():
        missing.append(str(thumbnail))
    if missing:
        problems.append(f"{path}: asset {asset_id!r} references missing files {missing}")
        return None
    epsilon = doc.get("epsilon")
    if epsilon is not None:
        try:
            epsilon = float(epsilon)
        except (TypeError, ValueError):
            problems.append(f"{path}: epsilon must be numeric")
            return None
        if epsilon <= 0:
            problems.append(f"{path}: epsilon must be positive")
            return None
    return AssetEntry(
        id=asset_id,
        kind=kind,
        name=str(doc.get("name", asset_id)),
        directory=directory,
        files=files,
        textures=textures,
        epsilon=epsilon,
        thumbnail=thumbnail,
    )


def scan_library(root) -> AssetLibrary:
    """Build a catalogue from every manifest under root, ordered by id."""
    root = Path(root)
    if not root.is_dir():
        raise CatalogueError([f"{root}: not a directory"])
    problems: list = []
    entries: list = []
    for path in sorted(root.rglob(MANIFEST_NAME)):
        entry = _parse_manifest(path, problems)
        if entry is not None:
            entries.append(entry)
    seen: dict = {}
    for entry in entries:
        if entry.id in seen:
            problems.append(
                f"duplicate asset id {entry.id!r} in {entry.directory} and {seen[entry.id]}"
            )
        else:
            seen[entry.id] = entry.directory
    if problems:
        raise CatalogueError(problems)
    entries.sort(key=lambda e: e.id)
    return AssetLibrary(root=root, entries=tuple(entries))


@dataclass(frozen=True)
class BodyAsset:
    """A dressable, posable body: blendshape basis, rig and skin weights."""

    basis: BlendShapeBasis
    skeleton: Skeleton
    binding: SkinBinding


def load_body_manifest(manifest_path) -> BodyAsset:
    """Load a body directly from one body-basis manifest.json."""
    problems: list = []
    entry = _parse_manifest(Path(manifest_path), problems)
    if entry is None:
        raise CatalogueError(problems)
    return load_body(entry)


def load_body(entry: AssetEntry) -> BodyAsset:
    if entry.kind != "body-basis":
        raise AssetFormatError(f"asset {entry.id!r} is {entry.kind}, expected body-basis")
    basis = load_basis(entry.files["basis"])
    skeleton = load_skeleton(entry.files["skeleton"])
    binding = load_binding(entry.files["weights"])
    if binding.vertex_count != basis.rest_mesh.vertex_count:
        raise AssetFormatError(
            f"asset {entry.id!r}: weights cover {binding.vertex_count} vertices, "
            f"basis has {basis.rest_mesh.vertex_count}"
        )
    from ..geometry import skeleton_signature

    if skeleton_signature(binding.bind_skeleton) != skeleton_signature(skeleton):
        raise AssetFormatError(
            f"asset {entry.id!r}: weights are bound to a different skeleton than the rig file"
        )
    return BodyAsset(basis=basis, skeleton=skeleton, binding=binding)


def load_garment(entry: AssetEntry) -> GarmentAsset:
    if entry.kind != "garment":
        raise AssetFormatError(f"asset {entry.id!r} is {entry.kind}, expected garment")
    mesh = import_obj(entry.files["mesh"].read_text())
    binding = load_binding(entry.files["weights"]) if "weights" in entry.files else None
    return GarmentAsset(
        mesh=mesh,
        binding=binding,
        texture_refs={k: str(v) for k, v in entry.textures.items()},
        offset_epsilon=entry.epsilon if entry.epsilon is not None else 0.002,
    )


def load_motion(entry: AssetEntry) -> MotionClip:
    if entry.kind != "motion":
        raise AssetFormatError(f"asset {entry.id!r} is {entry.kind}, expected motion")
    return parse_bvh(entry.files["bvh"].read_text())
