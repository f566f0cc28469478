"""Semantic blendshape body model.

A body is the rest mesh plus a per-attribute linear displacement field,
weighted by unitless slider values. Bases are built by running PCA on
corpora where each subset varies a single semantic trait, keeping one
principal component per named attribute.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import Mesh

MAGIC = b"AVBASIS\x00"
FORMAT_VERSION = 1


class ShapeError(ValueError):
    """Invalid basis, weights, or training corpus."""


@dataclass(frozen=True)
class ShapeWeights:
    """Per-attribute slider values (one scalar per attribute)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ShapeError("shape weights must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BlendShapeBasis:
    """Rest mesh plus per-attribute displacement fields and weight bounds.

    attributes: (m, n, 3) displacement per attribute per vertex.
    weight_bounds: (m, 2) inclusive (min, max) slider range per attribute.
    """

    rest_mesh: Mesh
    attributes: np.ndarray
    attribute_names: tuple
    weight_bounds: np.ndarray

    def __post_init__(self):
        attrs = np.asarray(self.attributes, dtype=np.float64)
        n = self.rest_mesh.vertex_count
        if attrs.ndim != 3 or attrs.shape[1:] != (n, 3):
            raise ShapeError(
                f"attributes must be (m, {n}, 3) for this rest mesh, got {attrs.shape}"
            )
        names = tuple(str(s) for s in self.attribute_names)
        bounds = np.asarray(self.weight_bounds, dtype=np.float64)
        m = attrs.shape[0]
        if len(names) != m or bounds.shape != (m, 2):
            raise ShapeError(
                f"attribute_names ({len(names)}) and weight_bounds {bounds.shape} "
                f"must both match m={m}"
            )
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise ShapeError("weight bounds must satisfy min <= max")
        attrs.setflags(write=False)
        bounds.setflags(write=False)
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "attribute_names", names)
        object.__setattr__(self, "weight_bounds", bounds)

    @property
    def attribute_count(self) -> int:
        return self.attributes.shape[0]

    def clamp(self, values: Sequence[float]) -> ShapeWeights:
        """Weights clamped into this basis's per-attribute bounds."""
        v = np.asarray(values, dtype=np.float64).reshape(-1)
        if len(v) != self.attribute_count:
            raise ShapeError(
                f"expected {self.attribute_count} weights, got {len(v)}"
            )
        return ShapeWeights(np.clip(v, self.weight_bounds[:, 0], self.weight_bounds[:, 1]))

    def zero_weights(self) -> ShapeWeights:
        return ShapeWeights(np.zeros(self.attribute_count))


def apply_shape(basis: BlendShapeBasis, weights: ShapeWeights) -> Mesh:
    """Evaluate the body mesh for the given attribute weights.

    Vertex i = rest vertex i + sum over attributes of weight_k * field_k[i].
    Topology and UVs are copied from the rest mesh; normals are recomputed.
    The sum runs attribute-major so results are bitwise reproducible.
    """
    if len(weights) != basis.attribute_count:
        raise ShapeError(
            f"basis has {basis.attribute_count} attributes but got {len(weights)} weights"
        )
    verts = basis.rest_mesh.vertices.copy()
    for k in range(basis.attribute_count):
        verts += weights.values[k] * basis.attributes[k]
    return basis.rest_mesh.with_vertices(verts)


def build_attribute_basis(
    corpus: Sequence[tuple], rest_mesh: Mesh
) -> BlendShapeBasis:
    """Build a basis from per-attribute mesh subsets.

    Each corpus entry is ``(attribute_name, meshes)``. Samples are centered
    on the rest mesh (so zero weights reproduce it exactly) and the first
    principal direction of each subset becomes that attribute's field,
    scaled so the extreme sample projection sits at weight magnitude 1.
    Bounds are the sample projections divided by that scale.
    """
    n = rest_mesh.vertex_count
    rest_flat = rest_mesh.vertices.reshape(-1)
    names, fields, bounds = [], [], []
    for name, meshes in corpus:
        meshes = list(meshes)
        if len(meshes) < 2:
            raise ShapeError(f"attribute {name!r} needs at least 2 samples, got {len(meshes)}")
        for mesh in meshes:
            if mesh.vertex_count != n or mesh.faces != rest_mesh.faces:
                raise ShapeError(
                    f"attribute {name!r} has a sample whose topology differs from the rest mesh"
                )
        centered = np.stack([m.vertices.reshape(-1) - rest_flat for m in meshes])
        # Dominant right singular vector; the dense 3n x 3n covariance route
        # is reserved for small-n test oracles.
        _, singular, vt = np.linalg.svd(centered, full_matrices=False)
        if singular[0] < 1e-12:
            raise ShapeError(f"attribute {name!r} has zero variance about the rest mesh")
        direction = vt[0]
        # Deterministic sign: largest-magnitude component is positive.
        pivot = int(np.argmax(np.abs(direction)))
        if direction[pivot] < 0:
            direction = -direction
        projections = centered @ direction
        scale = float(np.max(np.abs(projections)))
        names.append(str(name))
        fields.append((direction * scale).reshape(n, 3))
        bounds.append(
            (float(projections.min()) / scale, float(projections.max()) / scale)
        )
    if not names:
        raise ShapeError("corpus is empty")
    return BlendShapeBasis(
        rest_mesh=rest_mesh,
        attributes=np.stack(fields),
        attribute_names=tuple(names),
        weight_bounds=np.asarray(bounds),
    )


def _write_mesh_block(out: io.BytesIO, mesh: Mesh) -> None:
    out.write(struct.pack("<I", len(mesh.faces)))
    for f in mesh.faces:
        out.write(struct.pack("<B", len(f)))
        out.write(struct.pack(f"<{len(f)}I", *f))
    has_uvs = mesh.uvs is not None
    out.write(struct.pack("<B", 1 if has_uvs else 0))
    out.write(mesh.vertices.astype("<f4").tobytes())
    if has_uvs:
        out.write(mesh.uvs.astype("<f4").tobytes())


def save_basis(basis: BlendShapeBasis, path) -> None:
    """Write the versioned binary basis container (.avbasis)."""
    out = io.BytesIO()
    out.write(MAGIC)
    n = basis.rest_mesh.vertex_count
    m = basis.attribute_count
    out.write(struct.pack("<III", FORMAT_VERSION, n, m))
    for name in basis.attribute_names:
        encoded = name.encode("utf-8")
        out.write(struct.pack("<H", len(encoded)))
        out.write(encoded)
    out.write(basis.weight_bounds.astype("<f4").tobytes())
    _write_mesh_block(out, basis.rest_mesh)
    out.write(basis.attributes.astype("<f4").tobytes())
    Path(path).write_bytes(out.getvalue())


class _Reader:
    def __init__(self, data: bytes, label: str):
        self.data = data
        self.pos = 0
        self.label = label

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise ShapeError(f"{self.label}: truncated basis file")
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_basis(path) -> BlendShapeBasis:
    """Read a .avbasis container written by save_basis."""
    label = str(path)
    r = _Reader(Path(path).read_bytes(), label)
    if r.take(len(MAGIC)) != MAGIC:
        raise ShapeError(f"{label}: not a basis file (bad magic)")
    version, n, m = r.unpack("<III")
    if version != FORMAT_VERSION:
        raise ShapeError(f"{label}: unsupported basis version {version}")
    names = []
    for _ in range(m):
        (length,) = r.unpack("<H")
        names.append(r.take(length).decode("utf-8"))
    bounds = np.frombuffer(r.take(m * 2 * 4), dtype="<f4").astype(np.float64).reshape(m, 2)
    (face_count,) = r.unpack("<I")
    faces = []
    for _ in range(face_count):
        (arity,) = r.unpack("<B")
        if arity not in (3, 4):
            raise ShapeError(f"{label}: face arity {arity} not supported")
        faces.append(r.unpack(f"<{arity}I"))
    (has_uvs,) = r.unpack("<B")
    verts = np.frombuffer(r.take(n * 3 * 4), dtype="<f4").astype(np.float64).reshape(n, 3)
    uvs = None
    if has_uvs:
        uvs = np.frombuffer(r.take(n * 2 * 4), dtype="<f4").astype(np.float64).reshape(n, 2)
    attrs = np.frombuffer(r.take(m * n * 3 * 4), dtype="<f4").astype(np.float64).reshape(m, n, 3)
    if r.pos != len(r.data):
        raise ShapeError(f"{label}: trailing bytes after basis payload")
    rest = Mesh(vertices=verts, faces=tuple(faces), uvs=uvs)
    return BlendShapeBasis(rest, attrs, tuple(names), bounds)


def basis_to_json(basis: BlendShapeBasis) -> str:
    """Lossless JSON debug form of a basis."""
    doc = {
        "format": "avbasis-json",
        "version": FORMAT_VERSION,
        "attribute_names": list(basis.attribute_names),
        "weight_bounds": basis.weight_bounds.tolist(),
        "rest_mesh": {
            "vertices": basis.rest_mesh.vertices.tolist(),
            "faces": [list(f) for f in basis.rest_mesh.faces],
            "uvs": None if basis.rest_mesh.uvs is None else basis.rest_mesh.uvs.tolist(),
        },
        "attributes": basis.attributes.tolist(),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def basis_from_json(text: str) -> BlendShapeBasis:
    doc = json.loads(text)
    if doc.get("format") != "avbasis-json":
        raise ShapeError("not a JSON basis document")
    mesh_doc = doc["rest_mesh"]
    rest = Mesh(
        vertices=np.asarray(mesh_doc["vertices"]),
        faces=tuple(tuple(f) for f in mesh_doc["faces"]),
        uvs=None if mesh_doc.get("uvs") is None else np.asarray(mesh_doc["uvs"]),
    )
    return BlendShapeBasis(
        rest,
        np.asarray(doc["attributes"]),
        tuple(doc["attribute_names"]),
        np.asarray(doc["weight_bounds"]),
    )
