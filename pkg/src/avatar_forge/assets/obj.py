"""Wavefront OBJ import/export (v / vn / vt / f records)."""

from __future__ import annotations

import numpy as np

from ..geometry import GeometryError, Mesh


class ObjParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _floats(parts, count, line, what):
    if len(parts) < count:
        raise ObjParseError(f"{what} needs {count} values, got {len(parts)}", line)
    try:
        return [float(p) for p in parts[:count]]
    except ValueError:
        raise ObjParseError(f"non-numeric {what} value", line) from None


def _index(token: str, limit: int, line: int, what: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ObjParseError(f"non-numeric {what} index {token!r}", line) from None
    if value <= 0:
        raise ObjParseError(f"{what} index {value} is not positive (OBJ is 1-based)", line)
    if value > limit:
        raise ObjParseError(f"{what} index {value} out of range (only {limit} defined)", line)
    return value - 1


def import_obj(text: str) -> Mesh:
    """Parse OBJ text into a Mesh.

    Texture coordinates and normals are attached per vertex from the face
    corner references; they are kept only when every vertex receives one
    (normals are renormalized). Unknown record types are ignored.
    """
    positions: list = []
    raw_uvs: list = []
    raw_normals: list = []
    faces: list = []
    uv_of_vertex: dict = {}
    normal_of_vertex: dict = {}

    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split()
        record, args = parts[0], parts[1:]
        if record == "v":
            positions.append(_floats(args, 3, number, "vertex"))
        elif record == "vt":
            raw_uvs.append(_floats(args, 2, number, "texture coordinate"))
        elif record == "vn":
            raw_normals.append(_floats(args, 3, number, "normal"))
        elif record == "f":
            if len(args) not in (3, 4):
                raise ObjParseError(f"face needs 3 or 4 corners, got {len(args)}", number)
            corner_indices = []
            for corner in args:
                fields = corner.split("/")
                if len(fields) > 3 or not fields[0]:
                    raise ObjParseError(f"malformed face corner {corner!r}", number)
                vi = _index(fields[0], len(positions), number, "face vertex")
                corner_indices.append(vi)
                if len(fields) >= 2 and fields[1]:
                    ti = _index(fields[1], len(raw_uvs), number, "face texture")
                    uv_of_vertex[vi] = ti
                if len(fields) == 3 and fields[2]:
                    ni = _index(fields[2], len(raw_normals), number, "face normal")
                    normal_of_vertex[vi] = ni
            if len(set(corner_indices)) != len(corner_indices):
                raise ObjParseError("face repeats a vertex index", number)
            faces.append(tuple(corner_indices))

    if not positions:
        raise ObjParseError("no vertices in OBJ input", max(1, len(text.splitlines())))
    vertices = np.asarray(positions)

    uvs = None
    if raw_uvs and len(uv_of_vertex) == len(vertices):
        table = np.asarray(raw_uvs)
        uvs = np.stack([table[uv_of_vertex[i]] for i in range(len(vertices))])
    normals = None
    if raw_normals and len(normal_of_vertex) == len(vertices):
        table = np.asarray(raw_normals)
        stacked = np.stack([table[normal_of_vertex[i]] for i in range(len(vertices))])
        lengths = np.linalg.norm(stacked, axis=1)
        if np.any(lengths < 1e-12):
            raise ObjParseError("zero-length normal", len(text.splitlines()))
        normals = stacked / lengths[:, None]
    try:
        return Mesh(vertices=vertices, faces=tuple(faces), normals=normals, uvs=uvs)
    except GeometryError as exc:
        raise ObjParseError(str(exc), len(text.splitlines())) from None


def export_obj(mesh: Mesh) -> str:
    """Serialize a Mesh to OBJ text; deterministic byte-for-byte."""
    out = []
    for v in mesh.vertices:
        out.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
    has_uvs = mesh.uvs is not None
    has_normals = mesh.normals is not None
    if has_uvs:
        for t in mesh.uvs:
            out.append(f"vt {t[0]:.6f} {t[1]:.6f}")
    if has_normals:
        for n in mesh.normals:
            out.append(f"vn {n[0]:.6f} {n[1]:.6f} {n[2]:.6f}")
    for face in mesh.faces:
        corners = []
        for i in face:
            k = i + 1
            if has_uvs and has_normals:
                corners.append(f"{k}/{k}/{k}")
            elif has_uvs:
                corners.append(f"{k}/{k}")
            elif has_normals:
                corners.append(f"{k}//{k}")
            else:
                corners.append(str(k))
        out.append("f " + " ".join(corners))
    return "\n".join(out) + "\n"
