"""avatar-forge: blendshape bodies, BVH retargeting, dressing, datasets."""

from .bvh import BvhParseError, ChannelSpec, MotionClip, parse_bvh, pose_at_frame, write_bvh
from .geometry import (
    GeometryError,
    Joint,
    Mesh,
    Pose,
    Skeleton,
    Transform,
    forward_kinematics,
    joint_world_positions,
    rotation_between,
)
from .retarget import (
    RetargetError,
    RetargetMap,
    UnmappedBoneError,
    build_retarget_map,
    compute_alignments,
    compute_scale,
    map_bones,
    retarget_clip,
    retarget_pose,
)
from .shape import (
    BlendShapeBasis,
    ShapeError,
    ShapeWeights,
    apply_shape,
    build_attribute_basis,
    load_basis,
    save_basis,
)
from .skinning import (
    GarmentAsset,
    SkinBinding,
    SkinningError,
    resolve_penetration,
    skin_mesh,
    transfer_weights,
    winding_numbers,
)

__version__ = "0.1.0"

__all__ = [
    "BlendShapeBasis",
    "BvhParseError",
    "ChannelSpec",
    "GarmentAsset",
    "GeometryError",
    "Joint",
    "Mesh",
    "MotionClip",
    "Pose",
    "RetargetError",
    "RetargetMap",
    "ShapeError",
    "ShapeWeights",
    "SkinBinding",
    "Skeleton",
    "SkinningError",
    "Transform",
    "UnmappedBoneError",
    "apply_shape",
    "build_attribute_basis",
    "build_retarget_map",
    "compute_alignments",
    "compute_scale",
    "forward_kinematics",
    "joint_world_positions",
    "load_basis",
    "map_bones",
    "parse_bvh",
    "pose_at_frame",
    "resolve_penetration",
    "retarget_clip",
    "retarget_pose",
    "rotation_between",
    "save_basis",
    "skin_mesh",
    "transfer_weights",
    "winding_numbers",
    "write_bvh",
]
