"""Core geometric types: meshes, skeletons, poses, rigid transforms.

Conventions: units are meters, Y is up, the frame is right-handed.
Rotations are unit quaternions ``(w, x, y, z)``; matrices are derived views.
All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import quaternions as quat


class GeometryError(ValueError):
    """Invalid geometric data or incompatible arguments."""


def _as_points(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise GeometryError(f"{name} must be an (n, 3) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


def normalize_name(name: str) -> str:
    """Lowercase a joint name and strip separator characters."""
    return "".join(c for c in name.lower() if c not in " \t_-.:")


@dataclass(frozen=True)
class Mesh:
    """Indexed triangle/quad mesh.

    vertices: (n, 3) positions in meters.
    faces: polygons as index tuples of length 3 or 4.
    normals: optional (n, 3) unit vectors.
    uvs: optional (n, 2) texture coordinates.
    """

    vertices: np.ndarray
    faces: tuple
    normals: Optional[np.ndarray] = None
    uvs: Optional[np.ndarray] = None

    def __post_init__(self):
        verts = _as_points(self.vertices, "vertices")
        object.__setattr__(self, "vertices", verts)
        n = len(verts)
        faces = tuple(tuple(int(i) for i in f) for f in self.faces)
        for f in faces:
            if len(f) not in (3, 4):
                raise GeometryError(f"face {f} must have 3 or 4 vertices")
            if len(set(f)) != len(f):
                raise GeometryError(f"face {f} has a repeated vertex index")
            for i in f:
                if i < 0 or i >= n:
                    raise GeometryError(f"face index {i} out of range for {n} vertices")
        object.__setattr__(self, "faces", faces)
        if self.normals is not None:
            norms = _as_points(self.normals, "normals")
            if len(norms) != n:
                raise GeometryError(f"normal count {len(norms)} != vertex count {n}")
            lengths = np.linalg.norm(norms, axis=1)
            if not np.allclose(lengths, 1.0, atol=1e-6):
                raise GeometryError("normals must have unit length within 1e-6")
            object.__setattr__(self, "normals", norms)
        if self.uvs is not None:
            uvs = np.asarray(self.uvs, dtype=np.float64)
            if uvs.shape != (n, 2):
                raise GeometryError(f"uvs must be ({n}, 2), got {uvs.shape}")
            uvs.setflags(write=False)
            object.__setattr__(self, "uvs", uvs)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    def triangulated(self) -> np.ndarray:
        """Triangle index array (t, 3); quads fan-split at their first vertex."""
        tris = []
        for f in self.faces:
            tris.append((f[0], f[1], f[2]))
            if len(f) == 4:
                tris.append((f[0], f[2], f[3]))
        return np.asarray(tris, dtype=np.int64).reshape(-1, 3)

    def with_vertices(self, vertices: np.ndarray, recompute_normals: bool = True) -> "Mesh":
        """Copy of this mesh with new vertex positions (same topology)."""
        normals = None
        if recompute_normals:
            normals = compute_vertex_normals(vertices, self.faces)
        return Mesh(vertices=vertices, faces=self.faces, normals=normals, uvs=self.uvs)


def compute_vertex_normals(vertices: np.ndarray, faces: Sequence[Sequence[int]]) -> np.ndarray:
    """Area-weighted per-vertex normals; isolated vertices default to +Y.

    Face normals use Newell's method, which is robust for quads and
    near-degenerate polygons.
    """
    verts = np.asarray(vertices, dtype=np.float64)
    acc = np.zeros_like(verts)
    by_arity: dict = {}
    for f in faces:
        by_arity.setdefault(len(f), []).append(f)
    for arity, group in by_arity.items():
        idx = np.asarray(group, dtype=np.int64)  # (g, arity)
        p = verts[idx]  # (g, arity, 3)
        q = verts[np.roll(idx, -1, axis=1)]
        face_normals = np.cross(p, q).sum(axis=1)  # (g, 3)
        for corner in range(arity):
            np.add.at(acc, idx[:, corner], face_normals)
    lengths = np.linalg.norm(acc, axis=1)
    degenerate = lengths < 1e-12
    acc[degenerate] = (0.0, 1.0, 0.0)
    lengths[degenerate] = 1.0
    return acc / lengths[:, None]


@dataclass(frozen=True)
class Joint:
    name: str
    parent: Optional[int]
    rest_offset: np.ndarray
    end_site: Optional[np.ndarray] = None

    def __post_init__(self):
        off = np.asarray(self.rest_offset, dtype=np.float64).reshape(3)
        off.setflags(write=False)
        object.__setattr__(self, "rest_offset", off)
        if self.end_site is not None:
            es = np.asarray(self.end_site, dtype=np.float64).reshape(3)
            es.setflags(write=False)
            object.__setattr__(self, "end_site", es)


@dataclass(frozen=True)
class Skeleton:
    """Topologically ordered joint hierarchy (parent index < child index)."""

    joints: tuple

    def __post_init__(self):
        joints = tuple(self.joints)
        if not joints:
            raise GeometryError("skeleton must have at least one joint")
        roots = [k for k, j in enumerate(joints) if j.parent is None]
        if roots != [0]:
            raise GeometryError("skeleton must have exactly one root at index 0")
        seen = {}
        for k, j in enumerate(joints):
            if j.parent is not None and not (0 <= j.parent < k):
                raise GeometryError(
                    f"joint {j.name!r} at {k} has parent index {j.parent}; parents must precede children"
                )
            key = normalize_name(j.name)
            if key in seen:
                raise GeometryError(f"joint name {j.name!r} collides with {joints[seen[key]].name!r}")
            seen[key] = k
        object.__setattr__(self, "joints", joints)

    def __len__(self) -> int:
        return len(self.joints)

    @property
    def names(self) -> tuple:
        return tuple(j.name for j in self.joints)

    def index_of(self, name: str) -> int:
        key = normalize_name(name)
        for k, j in enumerate(self.joints):
            if normalize_name(j.name) == key:
                return k
        raise KeyError(name)

    def children_of(self, index: int) -> list:
        return [k for k, j in enumerate(self.joints) if j.parent == index]

    def rest_world_positions(self, include_end_sites: bool = False) -> np.ndarray:
        """Joint positions at the rest pose (identity rotations, zero root translation)."""
        pos = np.zeros((len(self.joints), 3))
        for k, j in enumerate(self.joints):
            base = pos[j.parent] if j.parent is not None else 0.0
            pos[k] = base + j.rest_offset
        if not include_end_sites:
            return pos
        extra = [pos[k] + j.end_site for k, j in enumerate(self.joints) if j.end_site is not None]
        if extra:
            return np.vstack([pos, np.asarray(extra)])
        return pos

    def scaled(self, factor: float) -> "Skeleton":
        """Skeleton with all offsets (and end sites) uniformly scaled."""
        return Skeleton(
            tuple(
                Joint(
                    j.name,
                    j.parent,
                    j.rest_offset * factor,
                    None if j.end_site is None else j.end_site * factor,
                )
                for j in self.joints
            )
        )


@dataclass(frozen=True)
class Pose:
    """Root translation plus per-joint local unit quaternions."""

    root_translation: np.ndarray
    local_rotations: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.root_translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise GeometryError("root_translation must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "root_translation", t)
        q = np.asarray(self.local_rotations, dtype=np.float64)
        if q.ndim != 2 or q.shape[1] != 4:
            raise GeometryError(f"local_rotations must be (j, 4), got {q.shape}")
        norms = np.linalg.norm(q, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise GeometryError("pose quaternions must be unit-norm within 1e-6")
        q.setflags(write=False)
        object.__setattr__(self, "local_rotations", q)

    @staticmethod
    def identity(joint_count: int) -> "Pose":
        q = np.tile(quat.IDENTITY, (joint_count, 1))
        return Pose(np.zeros(3), q)

    def __len__(self) -> int:
        return len(self.local_rotations)


@dataclass(frozen=True)
class Transform:
    """Rigid transform with uniform scale: p' = t + s * R(p)."""

    rotation: np.ndarray = field(default_factory=lambda: quat.IDENTITY.copy())
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    uniform_scale: float = 1.0

    def __post_init__(self):
        r = quat.normalize(np.asarray(self.rotation, dtype=np.float64).reshape(4))
        r.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)
        if not self.uniform_scale > 0:
            raise GeometryError(f"uniform_scale must be positive, got {self.uniform_scale}")

    @staticmethod
    def identity() -> "Transform":
        return Transform()

    def compose(self, other: "Transform") -> "Transform":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return Transform(
            rotation=quat.multiply(self.rotation, other.rotation),
            translation=self.translation
            + self.uniform_scale * quat.rotate(self.rotation, other.translation),
            uniform_scale=self.uniform_scale * other.uniform_scale,
        )

    def inverse(self) -> "Transform":
        inv_rot = quat.conjugate(self.rotation)
        inv_scale = 1.0 / self.uniform_scale
        return Transform(
            rotation=inv_rot,
            translation=-inv_scale * quat.rotate(inv_rot, self.translation),
            uniform_scale=inv_scale,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return self.translation + self.uniform_scale * quat.rotate(self.rotation, points)

    def matrix(self) -> np.ndarray:
        """Homogeneous 4x4 matrix view."""
        m = np.eye(4)
        m[:3, :3] = quat.to_matrix(self.rotation) * self.uniform_scale
        m[:3, 3] = self.translation
        return m


def skeleton_signature(skeleton: Skeleton) -> tuple:
    """Value identity of a skeleton: names, parents, offsets, end sites."""
    return tuple(
        (
            j.name,
            j.parent,
            tuple(j.rest_offset),
            None if j.end_site is None else tuple(j.end_site),
        )
        for j in skeleton.joints
    )


def forward_kinematics(skeleton: Skeleton, pose: Pose) -> list:
    """Per-joint world transforms.

    The world transform of joint k is parent_world ∘ local(k) with
    local(k) = (pose rotation k, rest offset k); the root's offset is
    displaced by the pose's root translation.
    """
    if len(pose) != len(skeleton):
        raise GeometryError(
            f"pose has {len(pose)} rotations but skeleton has {len(skeleton)} joints"
        )
    world: list = []
    for k, joint in enumerate(skeleton.joints):
        if joint.parent is None:
            local = Transform(pose.local_rotations[k], joint.rest_offset + pose.root_translation)
            world.append(local)
        else:
            local = Transform(pose.local_rotations[k], joint.rest_offset)
            world.append(world[joint.parent].compose(local))
    return world


def joint_world_positions(skeleton: Skeleton, pose: Pose) -> np.ndarray:
    return np.asarray([t.translation for t in forward_kinematics(skeleton, pose)])


def apply_global_transform(skeleton: Skeleton, pose: Pose, transform: Transform) -> Pose:
    """Pose whose world joint transforms are ``transform`` ∘ the originals."""
    root = skeleton.joints[0]
    old_root = Transform(pose.local_rotations[0], root.rest_offset + pose.root_translation)
    new_root = transform.compose(old_root)
    rotations = pose.local_rotations.copy()
    rotations[0] = new_root.rotation
    return Pose(new_root.translation - root.rest_offset, rotations)


def rotation_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimal rotation (unit quaternion) mapping unit vector a onto b.

    The antiparallel case returns a 180-degree turn about a deterministic
    axis perpendicular to a, derived from the coordinate axis least aligned
    with a.
    """
    a = np.asarray(a, dtype=np.float64).reshape(3)
    b = np.asarray(b, dtype=np.float64).reshape(3)
    for v, name in ((a, "a"), (b, "b")):
        if abs(np.linalg.norm(v) - 1.0) > 1e-6:
            raise GeometryError(f"rotation_between expects unit vectors; |{name}| != 1")
    d = float(np.dot(a, b))
    if d <= -1.0 + 1e-8:
        e = np.zeros(3)
        e[int(np.argmin(np.abs(a)))] = 1.0
        axis = e - np.dot(e, a) * a
        axis /= np.linalg.norm(axis)
        return np.concatenate([[0.0], axis])
    q = np.concatenate([[1.0 + d], np.cross(a, b)])
    return quat.normalize(q)
