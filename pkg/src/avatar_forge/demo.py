"""Synthetic demo asset library.

Builds a small self-contained library (blendshape body, two garments, two
motion clips, placeholder textures) entirely from procedural geometry, so
the service and UI run without any external assets.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from . import quaternions as quat
from .bvh import clip_from_poses, write_bvh
from .geometry import Joint, Mesh, Pose, Skeleton
from .primitives import icosphere, tube
from .shape import build_attribute_basis, save_basis
from .skinning import SkinBinding, resolve_penetration, transfer_weights
from .assets.formats import save_binding, save_skeleton
from .assets.obj import export_obj

BODY_ID = "demo-body"
GARMENT_IDS = ("skirt", "tunic")
MOTION_IDS = ("sway", "wave")


def demo_skeleton() -> Skeleton:
    """17-joint humanoid rig with Blender-style bone names."""
    j = [
        Joint("hips", None, (0.0, 0.95, 0.0)),
        Joint("spine", 0, (0.0, 0.15, 0.0)),
        Joint("chest", 1, (0.0, 0.25, 0.0)),
        Joint("neck", 2, (0.0, 0.15, 0.0)),
        Joint("head", 3, (0.0, 0.12, 0.0), end_site=(0.0, 0.22, 0.0)),
        Joint("upper_arm.L", 2, (0.18, 0.12, 0.0)),
        Joint("forearm.L", 5, (0.26, -0.02, 0.0)),
        Joint("hand.L", 6, (0.24, -0.02, 0.0), end_site=(0.10, 0.0, 0.0)),
        Joint("upper_arm.R", 2, (-0.18, 0.12, 0.0)),
        Joint("forearm.R", 8, (-0.26, -0.02, 0.0)),
        Joint("hand.R", 9, (-0.24, -0.02, 0.0), end_site=(-0.10, 0.0, 0.0)),
        Joint("thigh.L", 0, (0.10, -0.05, 0.0)),
        Joint("shin.L", 11, (0.02, -0.42, 0.0)),
        Joint("foot.L", 12, (0.01, -0.41, 0.0), end_site=(0.0, -0.03, 0.13)),
        Joint("thigh.R", 0, (-0.10, -0.05, 0.0)),
        Joint("shin.R", 14, (-0.02, -0.42, 0.0)),
        Joint("foot.R", 15, (-0.01, -0.41, 0.0), end_site=(0.0, -0.03, 0.13)),
    ]
    return Skeleton(tuple(j))


def motion_source_skeleton(scale: float = 1.0) -> Skeleton:
    """The same proportions under classic BVH joint names (for retargeting)."""
    target = demo_skeleton()
    classic = {
        "hips": "Hips",
        "spine": "Spine",
        "chest": "Spine1",
        "neck": "Neck",
        "head": "Head",
        "upper_arm.L": "LeftArm",
        "forearm.L": "LeftForeArm",
        "hand.L": "LeftHand",
        "upper_arm.R": "RightArm",
        "forearm.R": "RightForeArm",
        "hand.R": "RightHand",
        "thigh.L": "LeftUpLeg",
        "shin.L": "LeftLeg",
        "foot.L": "LeftFoot",
        "thigh.R": "RightUpLeg",
        "shin.R": "RightLeg",
        "foot.R": "RightFoot",
    }
    return Skeleton(
        tuple(
            Joint(
                classic[j.name],
                j.parent,
                j.rest_offset * scale,
                None if j.end_site is None else j.end_site * scale,
            )
            for j in target.joints
        )
    )


def demo_body_mesh(subdivisions: int = 3) -> Mesh:
    """Closed blob body: an icosphere stretched into a standing ellipsoid."""
    sphere = icosphere(subdivisions=subdivisions)
    verts = sphere.vertices * np.array([0.36, 0.92, 0.26]) + np.array([0.0, 0.95, 0.0])
    return sphere.with_vertices(verts)


def _bone_segments(skeleton: Skeleton) -> list:
    """(start, end) world rest segments per skinnable bone (joint, child/end)."""
    positions = skeleton.rest_world_positions()
    segments = []
    for k, joint in enumerate(skeleton.joints):
        children = skeleton.children_of(k)
        if children:
            for c in children:
                segments.append((k, positions[k], positions[c]))
        elif joint.end_site is not None:
            segments.append((k, positions[k], positions[k] + joint.end_site))
    return segments


def smooth_nearest_bone_binding(mesh: Mesh, skeleton: Skeleton, blend: int = 2) -> SkinBinding:
    """Distance-based weights to the nearest bone segments (inverse-square)."""
    segments = _bone_segments(skeleton)
    starts = np.asarray([s for _, s, _ in segments])
    ends = np.asarray([e for _, _, e in segments])
    joints = np.asarray([j for j, _, _ in segments])
    axes = ends - starts
    lengths2 = (axes**2).sum(axis=1)
    lengths2[lengths2 < 1e-12] = 1e-12
    influences = []
    for v in mesh.vertices:
        t = np.clip(((v - starts) * axes).sum(axis=1) / lengths2, 0.0, 1.0)
        closest = starts + t[:, None] * axes
        d = np.linalg.norm(v - closest, axis=1)
        order = np.argsort(d, kind="stable")[:blend]
        w = 1.0 / (d[order] + 1e-3) ** 2
        entries: dict = {}
        for j, weight in zip(joints[order], w):
            entries[int(j)] = entries.get(int(j), 0.0) + float(weight)
        influences.append(sorted(entries.items()))
    return SkinBinding.from_influences(influences, skeleton)


_FIELD_SPECS = (
    ("weight", 0.95, 0.55, "radial"),
    ("belly", 1.05, 0.18, "front"),
    ("breasts", 1.32, 0.14, "front"),
    ("shoulders", 1.45, 0.16, "sideways"),
    ("hips", 0.90, 0.16, "sideways"),
    ("waist", 1.15, 0.12, "radial"),
    ("height", 0.0, 0.0, "stretch"),
)


def attribute_field(mesh: Mesh, center_y: float, spread: float, mode: str) -> np.ndarray:
    """Analytic per-vertex displacement for one semantic slider."""
    v = mesh.vertices
    if mode == "stretch":
        y0 = v[:, 1].min()
        out = np.zeros_like(v)
        out[:, 1] = 0.08 * (v[:, 1] - y0)
        return out
    falloff = np.exp(-(((v[:, 1] - center_y) / spread) ** 2))
    radial = v - np.array([0.0, 1.0, 0.0]) * v[:, 1:2]
    norms = np.linalg.norm(radial, axis=1)
    norms[norms < 1e-9] = 1.0
    radial = radial / norms[:, None]
    if mode == "front":
        gate = np.clip(radial[:, 2], 0.0, None)
        return 0.06 * (falloff * gate)[:, None] * radial
    if mode == "sideways":
        out = np.zeros_like(v)
        out[:, 0] = 0.05 * falloff * np.sign(v[:, 0]) * np.abs(radial[:, 0])
        return out
    return 0.05 * falloff[:, None] * radial


def demo_basis(mesh: Mesh):
    """Seven-attribute basis built from symmetric synthetic corpora."""
    corpus = []
    for name, center, spread, mode in _FIELD_SPECS:
        d = attribute_field(mesh, center, spread, mode)
        plus = mesh.with_vertices(mesh.vertices + d, recompute_normals=False)
        minus = mesh.with_vertices(mesh.vertices - d, recompute_normals=False)
        corpus.append((name, [plus, minus]))
    return build_attribute_basis(corpus, mesh)


def _sway_poses(skeleton: Skeleton, frames: int = 60) -> list:
    names = {n: i for i, n in enumerate(skeleton.names)}
    poses = []
    for f in range(frames):
        t = 2.0 * np.pi * f / frames
        rot = np.tile(quat.IDENTITY, (len(skeleton), 1))
        rot[names["Spine"]] = quat.from_axis_angle((0, 0, 1), 0.12 * np.sin(t))
        rot[names["LeftArm"]] = quat.from_axis_angle((0, 0, 1), 0.5 + 0.4 * np.sin(t))
        rot[names["RightArm"]] = quat.from_axis_angle((0, 0, 1), -0.5 - 0.4 * np.sin(t))
        rot[names["LeftUpLeg"]] = quat.from_axis_angle((1, 0, 0), 0.35 * np.sin(t))
        rot[names["RightUpLeg"]] = quat.from_axis_angle((1, 0, 0), -0.35 * np.sin(t))
        rot[names["LeftLeg"]] = quat.from_axis_angle((1, 0, 0), 0.25 * (1 - np.cos(t)) / 2)
        rot[names["RightLeg"]] = quat.from_axis_angle((1, 0, 0), 0.25 * (1 + np.cos(t)) / 2)
        translation = (0.0, 0.02 * np.sin(2 * t), 0.0)
        poses.append(Pose(translation, rot))
    return poses


def _wave_poses(skeleton: Skeleton, frames: int = 40) -> list:
    names = {n: i for i, n in enumerate(skeleton.names)}
    poses = []
    for f in range(frames):
        t = 2.0 * np.pi * f / frames
        rot = np.tile(quat.IDENTITY, (len(skeleton), 1))
        rot[names["RightArm"]] = quat.from_axis_angle((0, 0, 1), -2.2)
        rot[names["RightForeArm"]] = quat.from_axis_angle((0, 0, 1), -0.4 * np.sin(3 * t))
        rot[names["Head"]] = quat.from_axis_angle((0, 0, 1), 0.1 * np.sin(t))
        poses.append(Pose((0.0, 0.0, 0.0), rot))
    return poses


def _write_png(path: Path, pixels: np.ndarray) -> None:
    """Minimal RGB PNG writer (filter 0, no interlace)."""
    h, w, _ = pixels.shape
    raw = b"".join(b"\x00" + pixels[row].astype(np.uint8).tobytes() for row in range(h))

    def chunk(kind: bytes, payload: bytes) -> bytes:
        return (
            struct.pack(">I", len(payload))
            + kind
            + payload
            + struct.pack(">I", zlib.crc32(kind + payload) & 0xFFFFFFFF)
        )

    header = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    data = b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header) + chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b"")
    path.write_bytes(data)


def _checker(size: int, a, b) -> np.ndarray:
    img = np.zeros((size, size, 3), dtype=np.uint8)
    ys, xs = np.mgrid[0:size, 0:size]
    mask = ((xs // (size // 4) + ys // (size // 4)) % 2).astype(bool)
    img[mask] = a
    img[~mask] = b
    return img


def _manifest(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def build_demo_library(root, subdivisions: int = 3) -> Path:
    """Create the demo asset library under root; returns the root path."""
    root = Path(root)
    body_dir = root / "body"
    body_dir.mkdir(parents=True, exist_ok=True)

    skeleton = demo_skeleton()
    mesh = demo_body_mesh(subdivisions=subdivisions)
    basis = demo_basis(mesh)
    binding = smooth_nearest_bone_binding(mesh, skeleton)

    save_basis(basis, body_dir / "body.avbasis")
    save_skeleton(skeleton, body_dir / "rig.json")
    save_binding(binding, body_dir / "weights.json")
    _manifest(
        body_dir / "manifest.json",
        {
            "id": BODY_ID,
            "kind": "body-basis",
            "name": "Demo Body",
            "files": {"basis": "body.avbasis", "skeleton": "rig.json", "weights": "weights.json"},
        },
    )

    garments = {
        "tunic": tube(0.30, 1.00, 1.52, rings=6, segments=24),
        "skirt": tube(0.27, 0.95, 0.40, rings=6, segments=24, radius_end=0.46),
    }
    colors = {"tunic": ((200, 40, 40), (230, 210, 210)), "skirt": ((40, 60, 180), (210, 210, 235))}
    for gid, cloth in garments.items():
        gdir = root / "garments" / gid
        gdir.mkdir(parents=True, exist_ok=True)
        resolved = resolve_penetration(mesh, cloth, epsilon=0.004)
        gbinding = transfer_weights(mesh, binding, resolved)
        (gdir / "mesh.obj").write_text(export_obj(resolved))
        save_binding(gbinding, gdir / "weights.json")
        _write_png(gdir / "albedo.png", _checker(16, *colors[gid]))
        flat = np.zeros((4, 4, 3), dtype=np.uint8)
        flat[:] = (128, 128, 255)
        _write_png(gdir / "normal.png", flat)
        _manifest(
            gdir / "manifest.json",
            {
                "id": gid,
                "kind": "garment",
                "name": gid.capitalize(),
                "files": {"mesh": "mesh.obj", "weights": "weights.json"},
                "textures": {"albedo": "albedo.png", "normal": "normal.png"},
                "epsilon": 0.004,
            },
        )

    source = motion_source_skeleton(scale=1.1)
    for mid, poses in (("sway", _sway_poses(source)), ("wave", _wave_poses(source))):
        mdir = root / "motions" / mid
        mdir.mkdir(parents=True, exist_ok=True)
        clip = clip_from_poses(source, poses, frame_time=1.0 / 30.0)
        (mdir / f"{mid}.bvh").write_text(write_bvh(clip))
        _manifest(
            mdir / "manifest.json",
            {
                "id": mid,
                "kind": "motion",
                "name": mid.capitalize(),
                "files": {"bvh": f"{mid}.bvh"},
            },
        )
    return root
