"""Compact binary container for retargeted pose sequences (.avposes).

Layout, little-endian:
    magic "AVPS" | u32 version | u32 joint count | u32 frame count
    | f64 frame time | per frame: root translation (3 f32) + per-joint
    quaternion wxyz (4 f32)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .geometry import Pose
from .retarget import RetargetedMotion

MAGIC = b"AVPS"
VERSION = 1


def save_poses(motion: RetargetedMotion, path) -> None:
    out = bytearray()
    joints = len(motion.skeleton)
    out += MAGIC
    out += struct.pack("<IIId", VERSION, joints, len(motion.poses), motion.frame_time)
    for pose in motion.poses:
        out += np.asarray(pose.root_translation, dtype="<f4").tobytes()
        out += np.asarray(pose.local_rotations, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(out))


def load_poses(path) -> tuple:
    """Returns (frame_time, list of (root_translation, local_rotations))."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a pose container")
    version, joints, frames, frame_time = struct.unpack_from("<IIId", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    pos = 4 + struct.calcsize("<IIId")
    stride = 3 * 4 + joints * 4 * 4
    poses = []
    for _ in range(frames):
        chunk = data[pos : pos + stride]
        translation = np.frombuffer(chunk[:12], dtype="<f4").astype(np.float64)
        rotations = np.frombuffer(chunk[12:], dtype="<f4").astype(np.float64).reshape(joints, 4)
        norms = np.linalg.norm(rotations, axis=1, keepdims=True)
        poses.append(Pose(translation, rotations / norms))
        pos += stride
    return frame_time, poses
