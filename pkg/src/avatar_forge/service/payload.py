"""Binary geometry payload exchanged with viewers.

Layout version 1, all little-endian:

    header:  magic "AVGE" | u16 version | u16 section count | u32 revision
    table:   per section: u8 kind | u16 name length | name utf-8
             | u32 item count | u32 byte offset | u32 byte length
    blob:    section payloads back to back (offsets relative to blob start)

Mesh sections (kind 0 body, 1 garment) hold interleaved position+normal
pairs (6 f32 per vertex); the joints section (kind 2) holds one world
position (3 f32) per joint.
"""

from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

from ..geometry import Mesh

MAGIC = b"AVGE"
LAYOUT_VERSION = 1
KIND_BODY = 0
KIND_GARMENT = 1
KIND_JOINTS = 2


def _interleave(mesh: Mesh) -> bytes:
    normals = mesh.normals
    if normals is None:
        raise ValueError("payload meshes must carry normals")
    data = np.empty((mesh.vertex_count, 6), dtype="<f4")
    data[:, :3] = mesh.vertices
    data[:, 3:] = normals
    return data.tobytes()


def pack_geometry(
    revision: int,
    body: Mesh,
    garments: Sequence[tuple],
    joint_positions: np.ndarray,
) -> bytes:
    """Serialize one evaluated frame. Garments must be pre-sorted by id."""
    sections = [(KIND_BODY, "body", body.vertex_count, _interleave(body))]
    for gid, mesh in garments:
        sections.append((KIND_GARMENT, gid, mesh.vertex_count, _interleave(mesh)))
    joints = np.asarray(joint_positions, dtype="<f4").reshape(-1, 3)
    sections.append((KIND_JOINTS, "joints", len(joints), joints.tobytes()))

    header = bytearray()
    header += MAGIC
    header += struct.pack("<HHI", LAYOUT_VERSION, len(sections), revision)
    blob = bytearray()
    table = bytearray()
    for kind, name, count, payload in sections:
        encoded = name.encode("utf-8")
        table += struct.pack("<BH", kind, len(encoded))
        table += encoded
        table += struct.pack("<III", count, len(blob), len(payload))
        blob += payload
    return bytes(header + table + blob)


def unpack_geometry(data: bytes) -> dict:
    """Parse a payload back into arrays (used by tests and tooling)."""
    if data[:4] != MAGIC:
        raise ValueError("not a geometry payload (bad magic)")
    version, count, revision = struct.unpack_from("<HHI", data, 4)
    if version != LAYOUT_VERSION:
        raise ValueError(f"unsupported payload version {version}")
    pos = 12
    entries = []
    for _ in range(count):
        kind, name_len = struct.unpack_from("<BH", data, pos)
        pos += 3
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        items, offset, length = struct.unpack_from("<III", data, pos)
        pos += 12
        entries.append((kind, name, items, offset, length))
    blob_start = pos
    sections = {}
    for kind, name, items, offset, length in entries:
        raw = data[blob_start + offset : blob_start + offset + length]
        if kind in (KIND_BODY, KIND_GARMENT):
            arr = np.frombuffer(raw, dtype="<f4").reshape(items, 6)
            sections[name] = {
                "kind": kind,
                "positions": arr[:, :3].astype(np.float64),
                "normals": arr[:, 3:].astype(np.float64),
            }
        else:
            arr = np.frombuffer(raw, dtype="<f4").reshape(items, 3)
            sections[name] = {"kind": kind, "positions": arr.astype(np.float64)}
    return {"revision": revision, "sections": sections}
