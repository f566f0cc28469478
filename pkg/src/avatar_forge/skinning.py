"""Linear blend skinning, body-to-cloth weight transfer and cloth
penetration resolution.

Bodies and garments stay separate meshes; garments are exteriorized once at
asset-preparation time by pushing offending vertices out along the body's
surface normals, with inside/outside decided by generalized winding numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import GeometryError, Mesh, Pose, Skeleton, forward_kinematics

MAX_INFLUENCES = 4


class SkinningError(ValueError):
    pass


class GeometryPreconditionError(SkinningError):
    """Body mesh is open or non-manifold; carries the offending edges."""

    def __init__(self, message: str, edges: Sequence[tuple]):
        self.edges = tuple(edges)
        preview = ", ".join(map(str, self.edges[:8]))
        if len(self.edges) > 8:
            preview += ", ..."
        super().__init__(f"{message}: {preview}")


@dataclass(frozen=True)
class SkinBinding:
    """Per-vertex joint influences against a bind skeleton and pose.

    indices/weights are (v, 4) arrays padded with zero-weight entries;
    weights sum to one per vertex and are trimmed to the four strongest
    influences on construction.
    """

    indices: np.ndarray
    weights: np.ndarray
    bind_skeleton: Skeleton
    bind_pose: Optional[Pose] = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        wts = np.asarray(self.weights, dtype=np.float64)
        if idx.shape != wts.shape or idx.ndim != 2 or idx.shape[1] != MAX_INFLUENCES:
            raise SkinningError(
                f"indices and weights must both be (v, {MAX_INFLUENCES}), got {idx.shape} and {wts.shape}"
            )
        if np.any(wts < 0):
            raise SkinningError("influence weights must be non-negative")
        if np.any((idx < 0) | (idx >= len(self.bind_skeleton))):
            raise SkinningError("influence joint index out of range for bind skeleton")
        sums = wts.sum(axis=1)
        if not np.allclose(sums, 1.0, atol=1e-6):
            raise SkinningError("per-vertex weights must sum to 1 within 1e-6")
        bind = self.bind_pose if self.bind_pose is not None else Pose.identity(len(self.bind_skeleton))
        if len(bind) != len(self.bind_skeleton):
            raise SkinningError("bind pose does not match bind skeleton")
        idx.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", wts)
        object.__setattr__(self, "bind_pose", bind)

    @property
    def vertex_count(self) -> int:
        return len(self.indices)

    @staticmethod
    def from_influences(
        influences: Sequence[Sequence[tuple]],
        bind_skeleton: Skeleton,
        bind_pose: Optional[Pose] = None,
    ) -> "SkinBinding":
        """Build from ragged per-vertex (joint, weight) lists.

        More than four influences are trimmed to the strongest four and
        renormalized; weights must be positive.
        """
        v = len(influences)
        idx = np.zeros((v, MAX_INFLUENCES), dtype=np.int64)
        wts = np.zeros((v, MAX_INFLUENCES))
        for i, entries in enumerate(influences):
            entries = [(int(j), float(w)) for j, w in entries]
            if not entries:
                raise SkinningError(f"vertex {i} has no influences")
            for j, w in entries:
                if w <= 0:
                    raise SkinningError(f"vertex {i} has non-positive weight {w} on joint {j}")
            entries.sort(key=lambda jw: (-jw[1], jw[0]))
            entries = entries[:MAX_INFLUENCES]
            total = sum(w for _, w in entries)
            for k, (j, w) in enumerate(entries):
                idx[i, k] = j
                wts[i, k] = w / total
        return SkinBinding(idx, wts, bind_skeleton, bind_pose)

    def influences(self) -> list:
        """Ragged [(joint, weight), ...] per vertex, zero-padding dropped."""
        out = []
        for row_idx, row_wts in zip(self.indices, self.weights):
            out.append([(int(j), float(w)) for j, w in zip(row_idx, row_wts) if w > 0])
        return out


@dataclass(frozen=True)
class GarmentAsset:
    """A dressable garment: mesh, optional binding, texture references."""

    mesh: Mesh
    binding: Optional[SkinBinding] = None
    texture_refs: dict = field(default_factory=dict)
    offset_epsilon: float = 0.002

    def __post_init__(self):
        if self.binding is not None and self.binding.vertex_count != self.mesh.vertex_count:
            raise SkinningError(
                f"binding covers {self.binding.vertex_count} vertices, mesh has {self.mesh.vertex_count}"
            )
        if not self.offset_epsilon > 0:
            raise SkinningError(f"offset_epsilon must be positive, got {self.offset_epsilon}")
        object.__setattr__(self, "texture_refs", dict(self.texture_refs))


def _skinning_matrices(binding: SkinBinding, pose: Pose) -> np.ndarray:
    """(j, 4, 4) matrices taking bind-space points to posed world space."""
    skeleton = binding.bind_skeleton
    if len(pose) != len(skeleton):
        raise GeometryError(
            f"pose has {len(pose)} joints but bind skeleton has {len(skeleton)}"
        )
    posed = forward_kinematics(skeleton, pose)
    bind = forward_kinematics(skeleton, binding.bind_pose)
    return np.stack([p.compose(b.inverse()).matrix() for p, b in zip(posed, bind)])


def skin_mesh(mesh: Mesh, binding: SkinBinding, pose: Pose) -> Mesh:
    """Deform a mesh by linear blend skinning.

    Each vertex is the weight-blended application of joint world transforms
    relative to the bind pose. Normals are transformed by the blended
    rotation and renormalized.
    """
    if binding.vertex_count != mesh.vertex_count:
        raise SkinningError(
            f"binding covers {binding.vertex_count} vertices, mesh has {mesh.vertex_count}"
        )
    matrices = _skinning_matrices(binding, pose)
    blended = np.einsum("vk,vkij->vij", binding.weights, matrices[binding.indices])
    verts = np.einsum("vij,vj->vi", blended[:, :3, :3], mesh.vertices) + blended[:, :3, 3]
    normals = None
    if mesh.normals is not None:
        rotated = np.einsum("vij,vj->vi", blended[:, :3, :3], mesh.normals)
        lengths = np.linalg.norm(rotated, axis=1)
        lengths[lengths < 1e-12] = 1.0
        normals = rotated / lengths[:, None]
    return Mesh(vertices=verts, faces=mesh.faces, normals=normals, uvs=mesh.uvs)


def transfer_weights(body: Mesh, body_binding: SkinBinding, cloth: Mesh) -> SkinBinding:
    """Copy each cloth vertex's weights from its nearest body vertex.

    Distances are Euclidean in the rest pose; ties pick the lower body
    vertex index.
    """
    if body.vertex_count == 0:
        raise SkinningError("body mesh has no vertices")
    if body_binding.vertex_count != body.vertex_count:
        raise SkinningError("body binding does not match body mesh")
    nearest = np.empty(cloth.vertex_count, dtype=np.int64)
    block = 1024
    for start in range(0, cloth.vertex_count, block):
        chunk = cloth.vertices[start : start + block]
        d2 = ((chunk[:, None, :] - body.vertices[None, :, :]) ** 2).sum(axis=2)
        nearest[start : start + len(chunk)] = np.argmin(d2, axis=1)
    return SkinBinding(
        indices=body_binding.indices[nearest],
        weights=body_binding.weights[nearest],
        bind_skeleton=body_binding.bind_skeleton,
        bind_pose=body_binding.bind_pose,
    )


def validate_closed_manifold(mesh: Mesh) -> None:
    """Require every polygon boundary edge to be shared by exactly two
    faces with opposite orientation; raises with the offending edges."""
    counts: dict = {}
    for f in mesh.faces:
        for k in range(len(f)):
            edge = (f[k], f[(k + 1) % len(f)])
            counts[edge] = counts.get(edge, 0) + 1
    bad = []
    for (a, b), count in counts.items():
        opposite = counts.get((b, a), 0)
        if count != 1 or opposite != 1:
            bad.append((a, b))
    if bad:
        bad.sort()
        raise GeometryPreconditionError(
            "body mesh is not a closed orientable manifold; offending edges", bad
        )


def _oriented_triangles(mesh: Mesh) -> np.ndarray:
    """Triangulation with outward orientation (positive enclosed volume)."""
    tris = mesh.triangulated()
    v = mesh.vertices
    a, b, c = v[tris[:, 0]], v[tris[:, 1]], v[tris[:, 2]]
    volume = np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0
    if volume < 0:
        tris = tris[:, [0, 2, 1]]
    return tris


def winding_numbers(points: np.ndarray, mesh_vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Generalized winding number of each query point (~1 inside, ~0 outside)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    verts = np.asarray(mesh_vertices, dtype=np.float64)
    out = np.empty(len(points))
    block = 256
    for start in range(0, len(points), block):
        p = points[start : start + block][:, None, :]
        a = verts[triangles[:, 0]][None, :, :] - p
        b = verts[triangles[:, 1]][None, :, :] - p
        c = verts[triangles[:, 2]][None, :, :] - p
        la = np.linalg.norm(a, axis=2)
        lb = np.linalg.norm(b, axis=2)
        lc = np.linalg.norm(c, axis=2)
        numerator = np.einsum("ptj,ptj->pt", a, np.cross(b, c))
        denominator = (
            la * lb * lc
            + np.einsum("ptj,ptj->pt", a, b) * lc
            + np.einsum("ptj,ptj->pt", b, c) * la
            + np.einsum("ptj,ptj->pt", c, a) * lb
        )
        omega = 2.0 * np.arctan2(numerator, denominator)
        out[start : start + p.shape[0]] = omega.sum(axis=1) / (4.0 * np.pi)
    return out


def _closest_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray):
    """Closest point to p on each triangle (a, b, c); (t, 3) result."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("tj,tj->t", ab, ap)
    d2 = np.einsum("tj,tj->t", ac, ap)
    bp = p - b
    d3 = np.einsum("tj,tj->t", ab, bp)
    d4 = np.einsum("tj,tj->t", ac, bp)
    cp = p - c
    d5 = np.einsum("tj,tj->t", ab, cp)
    d6 = np.einsum("tj,tj->t", ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    def safe(x):
        return np.where(np.abs(x) < 1e-300, 1e-300, x)

    v_ab = (d1 / safe(d1 - d3))[:, None]
    w_ac = (d2 / safe(d2 - d6))[:, None]
    w_bc = ((d4 - d3) / safe((d4 - d3) + (d5 - d6)))[:, None]
    denom = safe(va + vb + vc)
    v_in = (vb / denom)[:, None]
    w_in = (vc / denom)[:, None]

    result = a + ab * v_in + ac * w_in
    result = np.where(((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0))[:, None], b + w_bc * (c - b), result)
    result = np.where(((vb <= 0) & (d2 >= 0) & (d6 <= 0))[:, None], a + w_ac * ac, result)
    result = np.where(((vc <= 0) & (d1 >= 0) & (d3 <= 0))[:, None], a + v_ab * ab, result)
    result = np.where(((d6 >= 0) & (d5 <= d6))[:, None], c, result)
    result = np.where(((d3 >= 0) & (d4 <= d3))[:, None], b, result)
    result = np.where(((d1 <= 0) & (d2 <= 0))[:, None], a, result)
    return result


def closest_surface_points(points: np.ndarray, mesh_vertices: np.ndarray, triangles: np.ndarray):
    """Per-point closest surface point, its distance and triangle index."""
    verts = np.asarray(mesh_vertices, dtype=np.float64)
    a = verts[triangles[:, 0]]
    b = verts[triangles[:, 1]]
    c = verts[triangles[:, 2]]
    closest = np.empty((len(points), 3))
    distances = np.empty(len(points))
    tri_index = np.empty(len(points), dtype=np.int64)
    for i, p in enumerate(np.asarray(points, dtype=np.float64).reshape(-1, 3)):
        candidates = _closest_on_triangles(p, a, b, c)
        d2 = ((candidates - p) ** 2).sum(axis=1)
        t = int(np.argmin(d2))
        closest[i] = candidates[t]
        distances[i] = np.sqrt(d2[t])
        tri_index[i] = t
    return closest, distances, tri_index


def resolve_penetration(body: Mesh, cloth: Mesh, epsilon: float, max_passes: int = 8) -> Mesh:
    """Push cloth vertices outside the body by at least epsilon.

    The body must be a closed orientable manifold. Vertices inside the body
    (winding number > 0.5) or closer to its surface than epsilon move to
    epsilon along the outward normal of their closest surface point;
    vertices already clear are untouched.
    """
    if not epsilon > 0:
        raise SkinningError(f"epsilon must be positive, got {epsilon}")
    validate_closed_manifold(body)
    tris = _oriented_triangles(body)
    face_normals = np.cross(
        body.vertices[tris[:, 1]] - body.vertices[tris[:, 0]],
        body.vertices[tris[:, 2]] - body.vertices[tris[:, 0]],
    )
    lengths = np.linalg.norm(face_normals, axis=1)
    lengths[lengths < 1e-30] = 1.0
    face_normals = face_normals / lengths[:, None]

    verts = cloth.vertices.copy()
    moved_any = False
    pending = np.arange(len(verts))
    for _ in range(max_passes):
        inside = winding_numbers(verts[pending], body.vertices, tris) > 0.5
        closest, distances, tri_index = closest_surface_points(verts[pending], body.vertices, tris)
        offending = inside | (distances < epsilon * (1.0 - 1e-9))
        if not np.any(offending):
            break
        moved_any = True
        rows = pending[offending]
        verts[rows] = closest[offending] + epsilon * face_normals[tri_index[offending]]
        pending = rows
    else:
        still_inside = winding_numbers(verts[pending], body.vertices, tris) > 0.5
        if np.any(still_inside):
            raise SkinningError(
                f"penetration resolution did not converge for {int(still_inside.sum())} vertices"
            )
    if not moved_any:
        return cloth
    return cloth.with_vertices(verts)
