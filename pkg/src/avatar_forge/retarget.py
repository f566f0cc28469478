"""Motion transfer from a source skeleton onto a differently-rigged target.

The transfer runs in four steps: a global scale match, bone correspondence
search (exact names, then an alias table), per-bone rest-frame alignment
rotations, and per-frame rotation transfer through those alignments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import quaternions as quat
from .bvh import MotionClip, pose_at_frame
from .geometry import Pose, Skeleton, normalize_name, skeleton_signature

WORLD_UP = np.array([0.0, 1.0, 0.0])
WORLD_X = np.array([1.0, 0.0, 0.0])


class RetargetError(ValueError):
    pass


class UnmappedBoneError(RetargetError):
    """Mandatory bone correspondences could not be resolved."""

    def __init__(self, missing: Sequence[str]):
        self.missing = tuple(missing)
        super().__init__("unmapped mandatory bones: " + ", ".join(self.missing))


# Equivalence groups of normalized joint names covering common rigs;
# earlier entries win when several source joints compete for one target.
BUILTIN_ALIASES = (
    ("hips", "pelvis", "root", "hip"),
    ("spine", "spine01", "lowerback", "abdomen"),
    ("chest", "spine1", "spine2", "spine3", "spine02", "spine03", "upperchest", "thorax"),
    ("neck", "neck1", "neck01"),
    ("head",),
    ("leftshoulder", "claviclel", "leftclavicle", "leftcollar", "shoulderl"),
    ("rightshoulder", "clavicler", "rightclavicle", "rightcollar", "shoulderr"),
    ("leftarm", "upperarml", "leftupperarm", "arml", "leftuparm", "lhumerus", "larm"),
    ("rightarm", "upperarmr", "rightupperarm", "armr", "rightuparm", "rhumerus", "rarm"),
    ("leftforearm", "forearml", "lowerarml", "leftlowerarm", "leftelbow", "lforearm", "lradius"),
    ("rightforearm", "forearmr", "lowerarmr", "rightlowerarm", "rightelbow", "rforearm", "rradius"),
    ("lefthand", "handl", "lhand", "wristl", "leftwrist"),
    ("righthand", "handr", "rhand", "wristr", "rightwrist"),
    ("leftupleg", "thighl", "leftthigh", "upperlegl", "leftupperleg", "lthigh", "lupleg", "lhipjoint"),
    ("rightupleg", "thighr", "rightthigh", "upperlegr", "rightupperleg", "rthigh", "rupleg", "rhipjoint"),
    ("leftleg", "shinl", "leftshin", "lowerlegl", "leftlowerleg", "calfl", "leftcalf", "leftknee", "kneel", "lleg", "ltibia"),
    ("rightleg", "shinr", "rightshin", "lowerlegr", "rightlowerleg", "calfr", "rightcalf", "rightknee", "kneer", "rleg", "rtibia"),
    ("leftfoot", "footl", "lfoot", "anklel", "leftankle"),
    ("rightfoot", "footr", "rfoot", "ankler", "rightankle"),
    ("lefttoebase", "toel", "lefttoe", "ltoe", "toebasel"),
    ("righttoebase", "toer", "righttoe", "rtoe", "toebaser"),
)

MANDATORY_ROLES = {
    "root": BUILTIN_ALIASES[0],
    "chest": BUILTIN_ALIASES[2],
    "head": BUILTIN_ALIASES[4],
    "left_upper_arm": BUILTIN_ALIASES[7],
    "right_upper_arm": BUILTIN_ALIASES[8],
    "left_lower_arm": BUILTIN_ALIASES[9],
    "right_lower_arm": BUILTIN_ALIASES[10],
    "left_upper_leg": BUILTIN_ALIASES[13],
    "right_upper_leg": BUILTIN_ALIASES[14],
    "left_lower_leg": BUILTIN_ALIASES[15],
    "right_lower_leg": BUILTIN_ALIASES[16],
}


def _vertical_extent(skeleton: Skeleton) -> float:
    pos = skeleton.rest_world_positions(include_end_sites=True)
    return float(pos[:, 1].max() - pos[:, 1].min())


def _total_bone_length(skeleton: Skeleton) -> float:
    total = 0.0
    for j in skeleton.joints:
        if j.parent is not None:
            total += float(np.linalg.norm(j.rest_offset))
        if j.end_site is not None:
            total += float(np.linalg.norm(j.end_site))
    return total


def compute_scale(source: Skeleton, target: Skeleton) -> float:
    """Global size ratio between target and source rest skeletons.

    Primary measure is vertical extent of the rest joint cloud (end sites
    included); when either skeleton is essentially flat the ratio of total
    bone lengths is used instead.
    """
    src_len = _total_bone_length(source)
    tgt_len = _total_bone_length(target)
    if src_len <= 0 or tgt_len <= 0:
        raise RetargetError("degenerate skeleton: total bone length is zero")
    src_h = _vertical_extent(source)
    tgt_h = _vertical_extent(target)
    if src_h < 1e-6 or tgt_h < 1e-6:
        return tgt_len / src_len
    return tgt_h / src_h


def _alias_lookup(groups: Sequence[Sequence[str]]) -> dict:
    """name -> list of (group index, rank within group)."""
    lookup: dict = {}
    for gi, group in enumerate(groups):
        for rank, name in enumerate(group):
            lookup.setdefault(normalize_name(name), []).append((gi, rank))
    return lookup


def map_bones(
    source: Skeleton,
    target: Skeleton,
    aliases: Sequence[Sequence[str]] = (),
    overrides=None,
    strict: bool = True,
) -> list:
    """Resolve (source index, target index) bone pairs.

    Priority: explicit overrides, exact normalized-name matches, alias-table
    matches (user groups are consulted alongside the built-in table). The
    two roots are paired structurally when nothing else claimed them. With
    strict=True a missing mandatory correspondence raises UnmappedBoneError
    naming the missing roles.
    """
    overrides = dict(overrides or {})
    pairs: list = []
    used_source: set = set()
    used_target: set = set()

    def claim(si: int, ti: int):
        pairs.append((si, ti))
        used_source.add(si)
        used_target.add(ti)

    seen_src, seen_tgt = set(), set()
    for src_name, tgt_name in overrides.items():
        try:
            si = source.index_of(src_name)
        except KeyError:
            raise RetargetError(f"override source joint {src_name!r} not in source skeleton")
        try:
            ti = target.index_of(tgt_name)
        except KeyError:
            raise RetargetError(f"override target joint {tgt_name!r} not in target skeleton")
        if si in seen_src or ti in seen_tgt:
            raise RetargetError(
                f"conflicting override: {src_name!r} -> {tgt_name!r} duplicates an earlier pair"
            )
        seen_src.add(si)
        seen_tgt.add(ti)
        claim(si, ti)

    source_keys = [normalize_name(n) for n in source.names]
    target_keys = [normalize_name(n) for n in target.names]

    source_by_key = {}
    for si, key in enumerate(source_keys):
        source_by_key.setdefault(key, si)
    for ti, key in enumerate(target_keys):
        if ti in used_target:
            continue
        si = source_by_key.get(key)
        if si is not None and si not in used_source:
            claim(si, ti)

    lookup = _alias_lookup(tuple(aliases) + BUILTIN_ALIASES)
    for ti, key in enumerate(target_keys):
        if ti in used_target:
            continue
        target_groups = {gi for gi, _ in lookup.get(key, ())}
        if not target_groups:
            continue
        best = None  # (rank, source index)
        for si, src_key in enumerate(source_keys):
            if si in used_source:
                continue
            for gi, rank in lookup.get(src_key, ()):
                if gi in target_groups:
                    candidate = (rank, si)
                    if best is None or candidate < best:
                        best = candidate
        if best is not None:
            claim(best[1], ti)

    if 0 not in used_source and 0 not in used_target:
        claim(0, 0)

    pairs.sort(key=lambda p: p[1])

    if strict:
        missing = []
        for role, group in MANDATORY_ROLES.items():
            names = set(group)
            satisfied = any(
                source_keys[si] in names or target_keys[ti] in names for si, ti in pairs
            )
            if role == "root":
                satisfied = satisfied or any(si == 0 and ti == 0 for si, ti in pairs)
            if not satisfied:
                missing.append(role)
        if missing:
            raise UnmappedBoneError(missing)
    return pairs


def _primary_direction(
    skeleton: Skeleton, index: int, primary_child: Optional[dict] = None
) -> np.ndarray:
    """Unit rest-pose direction of the bone rooted at a joint.

    Uses the first child in document order (overridable by name), the end
    site for leaves, and falls back to the joint's own offset direction for
    leaves without end sites.
    """
    joint = skeleton.joints[index]
    children = skeleton.children_of(index)
    direction = None
    if primary_child:
        override = primary_child.get(joint.name) or primary_child.get(
            normalize_name(joint.name)
        )
        if override is not None:
            oi = skeleton.index_of(override)
            if skeleton.joints[oi].parent != index:
                raise RetargetError(
                    f"primary_child {override!r} is not a child of {joint.name!r}"
                )
            direction = skeleton.joints[oi].rest_offset
    if direction is None:
        if children:
            direction = skeleton.joints[children[0]].rest_offset
        elif joint.end_site is not None:
            direction = joint.end_site
        else:
            direction = joint.rest_offset
    norm = float(np.linalg.norm(direction))
    if norm < 1e-9:
        raise RetargetError(f"degenerate bone at joint {joint.name!r}: zero-length direction")
    return np.asarray(direction) / norm


def _bone_frame(u: np.ndarray) -> np.ndarray:
    """Orthonormal frame [primary, secondary, primary x secondary]."""
    w = WORLD_UP - np.dot(WORLD_UP, u) * u
    if np.linalg.norm(w) < 1e-6:
        w = WORLD_X - np.dot(WORLD_X, u) * u
    w = w / np.linalg.norm(w)
    return np.column_stack([u, w, np.cross(u, w)])


def compute_alignments(
    source: Skeleton,
    target: Skeleton,
    pairs: Sequence[tuple],
    primary_child: Optional[dict] = None,
) -> np.ndarray:
    """Per-pair rest-frame alignment quaternions.

    Each bone gets a rest world frame (primary axis toward its primary
    child, secondary from world up, fallback world X); the alignment maps
    the source frame onto the target frame.
    """
    out = np.zeros((len(pairs), 4))
    for i, (si, ti) in enumerate(pairs):
        f_src = _bone_frame(_primary_direction(source, si, primary_child))
        f_tgt = _bone_frame(_primary_direction(target, ti, primary_child))
        out[i] = quat.from_matrix(f_tgt @ f_src.T)
    return out


@dataclass(frozen=True)
class RetargetMap:
    """Scale, bone pairs and alignments binding one source to one target."""

    scale: float
    pairs: tuple
    alignments: np.ndarray
    unmapped_target: tuple
    parent_pair: tuple  # per pair: index of nearest mapped target ancestor's pair, or None
    source_signature: tuple = field(repr=False, default=())
    target_signature: tuple = field(repr=False, default=())

    def __post_init__(self):
        if self.scale <= 0:
            raise RetargetError(f"scale must be positive, got {self.scale}")
        pairs = tuple((int(s), int(t)) for s, t in self.pairs)
        if len({s for s, _ in pairs}) != len(pairs) or len({t for _, t in pairs}) != len(pairs):
            raise RetargetError("a joint appears in two pairs")
        align = np.asarray(self.alignments, dtype=np.float64)
        if align.shape != (len(pairs), 4):
            raise RetargetError(
                f"alignments must be ({len(pairs)}, 4), got {align.shape}"
            )
        align.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "alignments", align)
        object.__setattr__(self, "unmapped_target", tuple(int(t) for t in self.unmapped_target))
        object.__setattr__(self, "parent_pair", tuple(self.parent_pair))


def _parent_pairs(target: Skeleton, pairs: Sequence[tuple]) -> list:
    pair_of_target = {ti: i for i, (_, ti) in enumerate(pairs)}
    result = []
    for _, ti in pairs:
        parent = target.joints[ti].parent
        found = None
        while parent is not None:
            if parent in pair_of_target:
                found = pair_of_target[parent]
                break
            parent = target.joints[parent].parent
        result.append(found)
    return result


def build_retarget_map(
    source: Skeleton,
    target: Skeleton,
    aliases: Sequence[Sequence[str]] = (),
    overrides=None,
    primary_child: Optional[dict] = None,
    strict: bool = True,
) -> RetargetMap:
    """Run scale, correspondence and alignment steps for a skeleton pair."""
    scale = compute_scale(source, target)
    pairs = map_bones(source, target, aliases=aliases, overrides=overrides, strict=strict)
    if not any(ti == 0 for _, ti in pairs) or not any(si == 0 for si, _ in pairs):
        raise RetargetError("root joints of both skeletons must be paired")
    alignments = compute_alignments(source, target, pairs, primary_child=primary_child)
    mapped_targets = {ti for _, ti in pairs}
    unmapped = tuple(t for t in range(len(target)) if t not in mapped_targets)
    return RetargetMap(
        scale=scale,
        pairs=tuple(pairs),
        alignments=alignments,
        unmapped_target=unmapped,
        parent_pair=tuple(_parent_pairs(target, pairs)),
        source_signature=skeleton_signature(source),
        target_signature=skeleton_signature(target),
    )


def retarget_pose(pose: Pose, target: Skeleton, rmap: RetargetMap) -> Pose:
    """Transfer one source pose onto the target skeleton.

    For each pair the target local rotation is the source local rotation
    conjugated through the rest alignments of the bone and of its nearest
    mapped target ancestor; unmapped target joints stay at rest. Root
    translation is scaled by the map's global scale.
    """
    rotations = np.tile(quat.IDENTITY, (len(target), 1))
    for i, (si, ti) in enumerate(rmap.pairs):
        parent = rmap.parent_pair[i]
        a_parent = quat.IDENTITY if parent is None else rmap.alignments[parent]
        a_bone = rmap.alignments[i]
        local = quat.multiply(
            quat.multiply(a_parent, pose.local_rotations[si]), quat.conjugate(a_bone)
        )
        rotations[ti] = quat.normalize(local)
    return Pose(rmap.scale * pose.root_translation, rotations)


@dataclass(frozen=True)
class RetargetedMotion:
    """Pose sequence on the target skeleton with the source frame timing."""

    skeleton: Skeleton
    poses: tuple
    frame_time: float

    def __len__(self) -> int:
        return len(self.poses)


def retarget_clip(clip: MotionClip, target: Skeleton, rmap: RetargetMap) -> RetargetedMotion:
    """Transfer every frame of a clip onto the target skeleton."""
    if rmap.source_signature and rmap.source_signature != skeleton_signature(clip.skeleton):
        raise RetargetError("stale retarget map: clip skeleton differs from the mapped source")
    if rmap.target_signature and rmap.target_signature != skeleton_signature(target):
        raise RetargetError("stale retarget map: target skeleton differs from the mapped target")
    poses = tuple(
        retarget_pose(pose_at_frame(clip, f), target, rmap) for f in range(clip.frame_count)
    )
    return RetargetedMotion(skeleton=target, poses=poses, frame_time=clip.frame_time)


@dataclass(frozen=True)
class MapConfig:
    """User-supplied retarget hints loaded from a JSON map file."""

    overrides: dict = field(default_factory=dict)
    aliases: tuple = ()
    primary_child: dict = field(default_factory=dict)
    strict: bool = True


def load_map_config(path) -> MapConfig:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise RetargetError("map file must contain a JSON object")
    aliases = doc.get("aliases", [])
    if not isinstance(aliases, list) or not all(isinstance(g, list) for g in aliases):
        raise RetargetError("'aliases' must be a list of name groups")
    overrides = doc.get("overrides", {})
    if not isinstance(overrides, dict):
        raise RetargetError("'overrides' must be an object of source -> target names")
    primary_child = doc.get("primary_child", {})
    if not isinstance(primary_child, dict):
        raise RetargetError("'primary_child' must be an object of joint -> child names")
    return MapConfig(
        overrides=dict(overrides),
        aliases=tuple(tuple(g) for g in aliases),
        primary_child=dict(primary_child),
        strict=bool(doc.get("strict", True)),
    )
