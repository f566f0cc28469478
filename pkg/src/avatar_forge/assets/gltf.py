"""Binary glTF 2.0 (GLB) export of skinned meshes with one animation track."""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..geometry import (
    Pose,
    Skeleton,
    compute_vertex_normals,
    forward_kinematics,
    skeleton_signature,
)

_F32 = 5126
_U16 = 5123
_U32 = 5125
_GLB_MAGIC = 0x46546C67
_JSON_CHUNK = 0x4E4F534A
_BIN_CHUNK = 0x004E4942


class GltfExportError(ValueError):
    pass


class _Buffer:
    def __init__(self):
        self.data = bytearray()
        self.views: list = []

    def add_view(self, payload: bytes, target: Optional[int] = None) -> int:
        while len(self.data) % 4:
            self.data.append(0)
        view = {"buffer": 0, "byteOffset": len(self.data), "byteLength": len(payload)}
        if target is not None:
            view["target"] = target
        self.data.extend(payload)
        self.views.append(view)
        return len(self.views) - 1


def _accessor(accessors, view, ctype, count, kind, minmax=None) -> int:
    entry = {"bufferView": view, "componentType": ctype, "count": count, "type": kind}
    if minmax is not None:
        lo, hi = minmax
        entry["min"] = [float(x) for x in np.atleast_1d(lo)]
        entry["max"] = [float(x) for x in np.atleast_1d(hi)]
    accessors.append(entry)
    return len(accessors) - 1


def export_glb(
    meshes: Sequence[tuple],
    skeleton: Skeleton,
    poses: Sequence[Pose],
    frame_time: float,
    textures: Optional[dict] = None,
) -> bytes:
    """Build a GLB scene: joint hierarchy, skinned meshes, one animation.

    meshes: (name, Mesh, SkinBinding or None) triples. Bindings must all
    target the given skeleton with the same bind pose. Texture references
    (per mesh name: {"albedo": uri, "normal": uri}) become external-URI
    materials. Animation keys are spaced frame_time apart.
    """
    if not meshes:
        raise GltfExportError("nothing to export: no meshes")
    if frame_time <= 0:
        raise GltfExportError(f"frame_time must be positive, got {frame_time}")
    textures = textures or {}
    joint_count = len(skeleton)
    expected_signature = skeleton_signature(skeleton)
    bind_pose = None
    for name, _, binding in meshes:
        if binding is None:
            continue
        if skeleton_signature(binding.bind_skeleton) != expected_signature:
            raise GltfExportError(f"mesh {name!r} is bound to a different skeleton")
        if bind_pose is None:
            bind_pose = binding.bind_pose
        elif not np.array_equal(bind_pose.local_rotations, binding.bind_pose.local_rotations) or not np.array_equal(
            bind_pose.root_translation, binding.bind_pose.root_translation
        ):
            raise GltfExportError("inconsistent binding: meshes disagree on the bind pose")
    for index, pose in enumerate(poses):
        if len(pose) != joint_count:
            raise GltfExportError(f"pose {index} has {len(pose)} joints, skeleton has {joint_count}")

    buffer = _Buffer()
    accessors: list = []
    nodes: list = []
    for j, joint in enumerate(skeleton.joints):
        node = {"name": joint.name, "translation": [float(x) for x in joint.rest_offset]}
        children = skeleton.children_of(j)
        if children:
            node["children"] = children
        nodes.append(node)

    skin_index = None
    skins: list = []
    if any(binding is not None for _, _, binding in meshes):
        if bind_pose is None:
            bind_pose = Pose.identity(joint_count)
        world = forward_kinematics(skeleton, bind_pose)
        ibm = np.stack([t.inverse().matrix().T for t in world]).astype("<f4")  # column-major
        view = buffer.add_view(ibm.tobytes())
        ibm_accessor = _accessor(accessors, view, _F32, joint_count, "MAT4")
        skins.append({"inverseBindMatrices": ibm_accessor, "joints": list(range(joint_count)), "skeleton": 0})
        skin_index = 0

    images: list = []
    gl_textures: list = []
    materials: list = []

    def material_for(name: str) -> Optional[int]:
        refs = textures.get(name)
        if not refs:
            return None
        material: dict = {"name": f"{name}-material", "pbrMetallicRoughness": {}}
        for role, uri in refs.items():
            images.append({"uri": str(uri)})
            gl_textures.append({"source": len(images) - 1})
            if role == "normal":
                material["normalTexture"] = {"index": len(gl_textures) - 1}
            else:
                material["pbrMetallicRoughness"]["baseColorTexture"] = {
                    "index": len(gl_textures) - 1
                }
        materials.append(material)
        return len(materials) - 1

    gl_meshes: list = []
    mesh_nodes: list = []
    for name, mesh, binding in meshes:
        positions = mesh.vertices.astype("<f4")
        view = buffer.add_view(positions.tobytes(), target=34962)
        pos_accessor = _accessor(
            accessors, view, _F32, len(positions), "VEC3",
            minmax=(positions.min(axis=0), positions.max(axis=0)),
        )
        normals = mesh.normals
        if normals is None:
            normals = compute_vertex_normals(mesh.vertices, mesh.faces)
        view = buffer.add_view(normals.astype("<f4").tobytes(), target=34962)
        normal_accessor = _accessor(accessors, view, _F32, len(normals), "VEC3")
        attributes = {"POSITION": pos_accessor, "NORMAL": normal_accessor}
        if mesh.uvs is not None:
            view = buffer.add_view(mesh.uvs.astype("<f4").tobytes(), target=34962)
            attributes["TEXCOORD_0"] = _accessor(accessors, view, _F32, len(mesh.uvs), "VEC2")
        if binding is not None:
            if binding.vertex_count != mesh.vertex_count:
                raise GltfExportError(f"mesh {name!r}: binding does not match vertex count")
            if joint_count > 0xFFFF:
                raise GltfExportError("too many joints for 16-bit JOINTS_0")
            view = buffer.add_view(binding.indices.astype("<u2").tobytes(), target=34962)
            attributes["JOINTS_0"] = _accessor(accessors, view, _U16, binding.vertex_count, "VEC4")
            view = buffer.add_view(binding.weights.astype("<f4").tobytes(), target=34962)
            attributes["WEIGHTS_0"] = _accessor(accessors, view, _F32, binding.vertex_count, "VEC4")
        indices = mesh.triangulated().astype("<u4").reshape(-1)
        view = buffer.add_view(indices.tobytes(), target=34963)
        index_accessor = _accessor(accessors, view, _U32, len(indices), "SCALAR")
        primitive = {"attributes": attributes, "indices": index_accessor, "mode": 4}
        material = material_for(name)
        if material is not None:
            primitive["material"] = material
        gl_meshes.append({"name": name, "primitives": [primitive]})
        node: dict = {"name": f"{name}-node", "mesh": len(gl_meshes) - 1}
        if binding is not None and skin_index is not None:
            node["skin"] = skin_index
        nodes.append(node)
        mesh_nodes.append(len(nodes) - 1)

    animations: list = []
    if poses:
        times = (np.arange(len(poses)) * frame_time).astype("<f4")
        view = buffer.add_view(times.tobytes())
        time_accessor = _accessor(
            accessors, view, _F32, len(times), "SCALAR", minmax=(times.min(), times.max())
        )
        samplers: list = []
        channels: list = []
        rotations = np.stack([p.local_rotations for p in poses])  # (f, j, 4) wxyz
        xyzw = np.concatenate([rotations[..., 1:], rotations[..., :1]], axis=-1)
        for j in range(joint_count):
            view = buffer.add_view(xyzw[:, j, :].astype("<f4").tobytes())
            out_accessor = _accessor(accessors, view, _F32, len(poses), "VEC4")
            samplers.append(
                {"input": time_accessor, "interpolation": "LINEAR", "output": out_accessor}
            )
            channels.append(
                {"sampler": len(samplers) - 1, "target": {"node": j, "path": "rotation"}}
            )
        root_offset = skeleton.joints[0].rest_offset
        translations = np.stack([root_offset + p.root_translation for p in poses]).astype("<f4")
        view = buffer.add_view(translations.tobytes())
        out_accessor = _accessor(accessors, view, _F32, len(poses), "VEC3")
        samplers.append({"input": time_accessor, "interpolation": "LINEAR", "output": out_accessor})
        channels.append({"sampler": len(samplers) - 1, "target": {"node": 0, "path": "translation"}})
        animations.append({"name": "clip", "samplers": samplers, "channels": channels})

    doc = {
        "asset": {"version": "2.0", "generator": "avatar-forge"},
        "scene": 0,
        "scenes": [{"nodes": [0] + mesh_nodes}],
        "nodes": nodes,
        "meshes": gl_meshes,
        "accessors": accessors,
        "bufferViews": buffer.views,
        "buffers": [{"byteLength": len(buffer.data)}],
    }
    if skins:
        doc["skins"] = skins
    if animations:
        doc["animations"] = animations
    if materials:
        doc["materials"] = materials
        doc["textures"] = gl_textures
        doc["images"] = images

    json_bytes = json.dumps(doc, separators=(",", ":"), sort_keys=True).encode("utf-8")
    json_bytes += b" " * (-len(json_bytes) % 4)
    bin_bytes = bytes(buffer.data)
    bin_bytes += b"\x00" * (-len(bin_bytes) % 4)
    total = 12 + 8 + len(json_bytes) + 8 + len(bin_bytes)
    out = bytearray()
    out += struct.pack("<III", _GLB_MAGIC, 2, total)
    out += struct.pack("<II", len(json_bytes), _JSON_CHUNK)
    out += json_bytes
    out += struct.pack("<II", len(bin_bytes), _BIN_CHUNK)
    out += bin_bytes
    return bytes(out)


def write_glb(path, *args, **kwargs) -> None:
    Path(path).write_bytes(export_glb(*args, **kwargs))
