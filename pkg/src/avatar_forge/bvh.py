"""Biovision Hierarchy (BVH) motion file parsing, serialization and pose
evaluation.

Parsing is total: any input either yields a MotionClip or raises a
BvhParseError carrying the offending line number. Rotation values are kept
in degrees exactly as stored in the file; pose evaluation converts them to
quaternions using intrinsic composition in channel order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import quaternions as quat
from .geometry import GeometryError, Joint, Pose, Skeleton

POSITION_CHANNELS = ("Xposition", "Yposition", "Zposition")
ROTATION_CHANNELS = ("Xrotation", "Yrotation", "Zrotation")
_CANONICAL = {name.lower(): name for name in POSITION_CHANNELS + ROTATION_CHANNELS}
_AXIS_INDEX = {"X": 0, "Y": 1, "Z": 2}
_MAX_DEPTH = 512


class BvhParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class BvhError(ValueError):
    """Invalid clip data outside of text parsing."""


@dataclass(frozen=True)
class ChannelSpec:
    """Per-joint ordered channel names, in skeleton joint order."""

    joints: tuple

    def __post_init__(self):
        spec = tuple(tuple(ch for ch in j) for j in self.joints)
        for channels in spec:
            rotations = [c for c in channels if c in ROTATION_CHANNELS]
            positions = [c for c in channels if c in POSITION_CHANNELS]
            unknown = [c for c in channels if c not in ROTATION_CHANNELS + POSITION_CHANNELS]
            if unknown:
                raise BvhError(f"unknown channel names {unknown}")
            if len(set(rotations)) != len(rotations) or len(set(positions)) != len(positions):
                raise BvhError(f"duplicate channel in {channels}")
            if rotations and len(rotations) != 3:
                raise BvhError(
                    f"rotation channels must be a full axis permutation or absent, got {rotations}"
                )
        object.__setattr__(self, "joints", spec)

    @property
    def total(self) -> int:
        return sum(len(j) for j in self.joints)


@dataclass(frozen=True)
class MotionClip:
    """Parsed BVH: skeleton, channel layout, frame time and raw frame rows.

    frames: (frame_count, total_channels) float64; rotations in degrees,
    positions in file units.
    """

    skeleton: Skeleton
    channels: ChannelSpec
    frame_time: float
    frames: np.ndarray

    def __post_init__(self):
        if len(self.channels.joints) != len(self.skeleton):
            raise BvhError(
                f"channel spec covers {len(self.channels.joints)} joints, "
                f"skeleton has {len(self.skeleton)}"
            )
        if not self.frame_time > 0:
            raise BvhError(f"frame_time must be positive, got {self.frame_time}")
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != self.channels.total:
            raise BvhError(
                f"frames must be (f, {self.channels.total}), got {frames.shape}"
            )
        if not np.all(np.isfinite(frames)):
            raise BvhError("frame values must be finite")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def duration(self) -> float:
        return self.frame_count * self.frame_time


class _Tokens:
    """Whitespace token stream with line tracking."""

    def __init__(self, text: str):
        self.items = []  # (token, line_number)
        self.lines = text.splitlines()
        for number, line in enumerate(self.lines, start=1):
            for token in line.split():
                self.items.append((token, number))
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    def next(self, expectation: str) -> tuple:
        if self.pos >= len(self.items):
            raise BvhParseError(f"unexpected end of file, expected {expectation}", len(self.lines) or 1)
        item = self.items[self.pos]
        self.pos += 1
        return item

    @property
    def line(self) -> int:
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return len(self.lines) or 1


def _parse_float(token: str, line: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise BvhParseError(f"non-numeric {what} {token!r}", line) from None
    if not np.isfinite(value):
        raise BvhParseError(f"non-finite {what} {token!r}", line)
    return value


def _parse_name(tokens: _Tokens, keyword: str) -> str:
    # A joint name runs up to the opening brace; embedded spaces collapse
    # to single spaces.
    parts = []
    while True:
        token, line = tokens.next(f"name after {keyword}")
        if token == "{":
            if not parts:
                raise BvhParseError(f"missing name after {keyword}", line)
            return " ".join(parts)
        parts.append(token)


def _parse_offset(tokens: _Tokens) -> np.ndarray:
    values = []
    for _ in range(3):
        token, line = tokens.next("OFFSET value")
        values.append(_parse_float(token, line, "offset"))
    return np.asarray(values)


def parse_bvh(text: str) -> MotionClip:
    """Parse BVH text into a MotionClip.

    Keywords match case-insensitively; LF and CRLF both accepted. End Site
    blocks and leaf joints without them are both valid.
    """
    tokens = _Tokens(text)
    token, line = tokens.next("HIERARCHY")
    if token.lower() != "hierarchy":
        raise BvhParseError(f"expected HIERARCHY, got {token!r}", line)

    joints: list = []  # [name, parent, offset, end_site]
    channel_spec: list = []
    stack: list = []  # indices of open joints

    token, line = tokens.next("ROOT")
    if token.lower() != "root":
        raise BvhParseError(f"expected ROOT, got {token!r}", line)

    def open_joint(keyword: str):
        name = _parse_name(tokens, keyword)
        parent = stack[-1] if stack else None
        joints.append([name, parent, None, None])
        channel_spec.append(())
        stack.append(len(joints) - 1)
        if len(stack) > _MAX_DEPTH:
            raise BvhParseError(f"joint nesting deeper than {_MAX_DEPTH}", tokens.line)
        token, line = tokens.next("OFFSET")
        if token.lower() != "offset":
            raise BvhParseError(f"expected OFFSET, got {token!r}", line)
        joints[-1][2] = _parse_offset(tokens)
        token, line = tokens.next("CHANNELS")
        if token.lower() != "channels":
            raise BvhParseError(f"expected CHANNELS, got {token!r}", line)
        count_token, count_line = tokens.next("channel count")
        try:
            count = int(count_token)
        except ValueError:
            raise BvhParseError(f"non-numeric channel count {count_token!r}", count_line) from None
        if count < 0 or count > 6:
            raise BvhParseError(f"channel count {count} out of range 0..6", count_line)
        names = []
        for _ in range(count):
            ch_token, ch_line = tokens.next("channel name")
            canonical = _CANONICAL.get(ch_token.lower())
            if canonical is None:
                raise BvhParseError(f"unknown channel {ch_token!r}", ch_line)
            names.append(canonical)
        try:
            ChannelSpec((tuple(names),))
        except BvhError as exc:
            raise BvhParseError(str(exc), count_line) from None
        channel_spec[-1] = tuple(names)

    open_joint("ROOT")

    while stack:
        token, line = tokens.next("JOINT, End Site or '}'")
        lowered = token.lower()
        if lowered == "joint":
            open_joint("JOINT")
        elif lowered == "end":
            site_token, site_line = tokens.next("Site")
            if site_token.lower() != "site":
                raise BvhParseError(f"expected 'Site' after 'End', got {site_token!r}", site_line)
            brace, brace_line = tokens.next("'{'")
            if brace != "{":
                raise BvhParseError("expected '{' after End Site", brace_line)
            off_token, off_line = tokens.next("OFFSET")
            if off_token.lower() != "offset":
                raise BvhParseError(f"expected OFFSET in End Site, got {off_token!r}", off_line)
            offset = _parse_offset(tokens)
            close, close_line = tokens.next("'}'")
            if close != "}":
                raise BvhParseError("expected '}' closing End Site", close_line)
            current = joints[stack[-1]]
            if current[3] is not None:
                raise BvhParseError(f"joint {current[0]!r} has multiple End Sites", line)
            current[3] = offset
        elif token == "}":
            stack.pop()
        else:
            raise BvhParseError(f"unexpected token {token!r} in hierarchy", line)

    try:
        skeleton = Skeleton(tuple(Joint(n, p, o, e) for n, p, o, e in joints))
        channels = ChannelSpec(tuple(channel_spec))
    except (GeometryError, BvhError) as exc:
        raise BvhParseError(str(exc), tokens.line) from None

    token, line = tokens.next("MOTION")
    if token.lower() != "motion":
        raise BvhParseError(f"expected MOTION, got {token!r}", line)
    token, line = tokens.next("Frames:")
    if token.lower() not in ("frames:", "frames"):
        raise BvhParseError(f"expected 'Frames:', got {token!r}", line)
    count_token, count_line = tokens.next("frame count")
    try:
        declared = int(count_token)
    except ValueError:
        raise BvhParseError(f"non-numeric frame count {count_token!r}", count_line) from None
    if declared < 0:
        raise BvhParseError(f"negative frame count {declared}", count_line)
    token, line = tokens.next("Frame Time:")
    if token.lower() != "frame":
        raise BvhParseError(f"expected 'Frame Time:', got {token!r}", line)
    token, line = tokens.next("Time:")
    if token.lower() not in ("time:", "time"):
        raise BvhParseError(f"expected 'Time:' after 'Frame', got {token!r}", line)
    time_token, time_line = tokens.next("frame time value")
    frame_time = _parse_float(time_token, time_line, "frame time")
    if frame_time <= 0:
        raise BvhParseError(f"frame time must be positive, got {frame_time}", time_line)

    if tokens.pos < len(tokens.items) and tokens.items[tokens.pos][1] == time_line:
        raise BvhParseError("unexpected data after Frame Time value", time_line)

    per_frame = channels.total
    rows = []
    for number in range(time_line + 1, len(tokens.lines) + 1):
        raw = tokens.lines[number - 1].split()
        if not raw:
            continue
        if len(rows) >= declared:
            raise BvhParseError(
                f"frame-count mismatch: declared {declared} frames but found more data", number
            )
        if len(raw) != per_frame:
            raise BvhParseError(
                f"frame row has {len(raw)} values, expected {per_frame}", number
            )
        rows.append([_parse_float(tok, number, "frame value") for tok in raw])
    if len(rows) != declared:
        raise BvhParseError(
            f"frame-count mismatch: declared {declared} frames but found {len(rows)}",
            len(tokens.lines) or 1,
        )
    frames = np.asarray(rows, dtype=np.float64).reshape(declared, per_frame)
    return MotionClip(skeleton=skeleton, channels=channels, frame_time=frame_time, frames=frames)


def _fmt(value: float) -> str:
    text = f"{value:.6f}"
    return "0.000000" if text in ("-0.000000",) else text


def write_bvh(clip: MotionClip) -> str:
    """Serialize a clip with canonical formatting.

    Tab indentation, 6-decimal fixed-point values, LF line endings. A second
    write-parse-write pass is byte-identical.
    """
    if clip.frame_time < 5e-7:
        raise BvhError(f"frame_time {clip.frame_time} is below serialization resolution")
    out = ["HIERARCHY"]
    children: list = [[] for _ in clip.skeleton.joints]
    for k, joint in enumerate(clip.skeleton.joints):
        if joint.parent is not None:
            children[joint.parent].append(k)

    # Hierarchy nests depth-first, so frame columns are gathered in the same
    # order; for clips that came from parse_bvh this is the original order.
    starts = np.concatenate([[0], np.cumsum([len(ch) for ch in clip.channels.joints])])
    emission_order: list = []

    def emit(index: int, depth: int):
        emission_order.append(index)
        joint = clip.skeleton.joints[index]
        indent = "\t" * depth
        keyword = "ROOT" if joint.parent is None else "JOINT"
        out.append(f"{indent}{keyword} {joint.name}")
        out.append(f"{indent}{{")
        inner = "\t" * (depth + 1)
        off = joint.rest_offset
        out.append(f"{inner}OFFSET {_fmt(off[0])} {_fmt(off[1])} {_fmt(off[2])}")
        names = clip.channels.joints[index]
        out.append((f"{inner}CHANNELS {len(names)} " + " ".join(names)).rstrip())
        if joint.end_site is not None:
            es = joint.end_site
            out.append(f"{inner}End Site")
            out.append(f"{inner}{{")
            out.append(f"{inner}\tOFFSET {_fmt(es[0])} {_fmt(es[1])} {_fmt(es[2])}")
            out.append(f"{inner}}}")
        for child in children[index]:
            emit(child, depth + 1)
        out.append(f"{indent}}}")

    emit(0, 0)
    column_order = np.concatenate(
        [np.arange(starts[j], starts[j + 1]) for j in emission_order]
    ).astype(np.int64)
    out.append("MOTION")
    out.append(f"Frames: {clip.frame_count}")
    out.append(f"Frame Time: {_fmt(clip.frame_time)}")
    for row in clip.frames:
        out.append(" ".join(_fmt(v) for v in row[column_order]))
    return "\n".join(out) + "\n"


def _axis_quat(axis: str, degrees: float) -> np.ndarray:
    unit = np.zeros(3)
    unit[_AXIS_INDEX[axis]] = 1.0
    return quat.from_axis_angle(unit, np.deg2rad(degrees))


def pose_at_frame(clip: MotionClip, frame: int) -> Pose:
    """Pose for one frame.

    Per-joint rotation composes the axis rotations intrinsically in channel
    order; root translation comes from the root's position channels (zero
    when absent). Non-root position channels are ignored.
    """
    if not 0 <= frame < clip.frame_count:
        raise IndexError(f"frame {frame} out of range for {clip.frame_count}-frame clip")
    row = clip.frames[frame]
    rotations = np.tile(quat.IDENTITY, (len(clip.skeleton), 1))
    root_translation = np.zeros(3)
    cursor = 0
    for index, channels in enumerate(clip.channels.joints):
        q = quat.IDENTITY
        for name in channels:
            value = row[cursor]
            cursor += 1
            if name in ROTATION_CHANNELS:
                q = quat.multiply(q, _axis_quat(name[0], value))
            elif index == 0:
                root_translation[_AXIS_INDEX[name[0]]] = value
        rotations[index] = quat.normalize(q)
    return Pose(root_translation, rotations)


def clip_from_poses(
    skeleton: Skeleton,
    poses: Sequence[Pose],
    frame_time: float,
    rotation_order: str = "ZXY",
) -> MotionClip:
    """Build a clip from poses using a canonical channel layout.

    Root gets position + rotation channels, other joints rotation only, in
    the given intrinsic rotation order.
    """
    from scipy.spatial.transform import Rotation

    if rotation_order not in ("ZXY", "XYZ", "ZYX", "YXZ", "XZY", "YZX"):
        raise BvhError(f"unsupported rotation order {rotation_order!r}")
    rotation_names = tuple(f"{axis}rotation" for axis in rotation_order)
    spec = ChannelSpec(
        (POSITION_CHANNELS + rotation_names,)
        + tuple(rotation_names for _ in range(len(skeleton) - 1))
    )
    rows = np.zeros((len(poses), spec.total))
    for f, pose in enumerate(poses):
        if len(pose) != len(skeleton):
            raise BvhError(f"pose {f} has {len(pose)} joints, skeleton has {len(skeleton)}")
        wxyz = pose.local_rotations
        xyzw = np.concatenate([wxyz[:, 1:], wxyz[:, :1]], axis=1)
        eulers = Rotation.from_quat(xyzw).as_euler(rotation_order, degrees=True)
        rows[f, 0:3] = pose.root_translation
        rows[f, 3:6] = eulers[0]
        rows[f, 6:] = eulers[1:].reshape(-1)
    return MotionClip(skeleton=skeleton, channels=spec, frame_time=frame_time, frames=rows)
