import numpy as np
import pytest

from avatar_forge import quaternions as quat
from avatar_forge.bvh import clip_from_poses, pose_at_frame
from avatar_forge.demo import demo_skeleton, motion_source_skeleton, _sway_poses
from avatar_forge.geometry import Joint, Pose, Skeleton, joint_world_positions
from avatar_forge.retarget import (
    RetargetError,
    UnmappedBoneError,
    build_retarget_map,
    compute_alignments,
    compute_scale,
    load_map_config,
    map_bones,
    retarget_clip,
    retarget_pose,
    skeleton_signature,
)

from conftest import make_chain


def rotate_skeleton(skeleton, q):
    """Rigidly rotate all rest offsets and end sites."""
    return Skeleton(
        tuple(
            Joint(
                j.name,
                j.parent,
                quat.rotate(q, j.rest_offset),
                None if j.end_site is None else quat.rotate(q, j.end_site),
            )
            for j in skeleton.joints
        )
    )


def sway_clip(frames=100):
    source = motion_source_skeleton()
    return clip_from_poses(source, _sway_poses(source, frames), frame_time=1 / 30)


class TestComputeScale:
    def test_identical_skeletons_exactly_one(self):
        skeleton = demo_skeleton()
        assert compute_scale(skeleton, skeleton) == 1.0

    def test_uniform_double(self):
        skeleton = demo_skeleton()
        assert abs(compute_scale(skeleton, skeleton.scaled(2.0)) - 2.0) < 1e-9

    def test_hand_computed_extents(self):
        two = make_chain([(0, 0, 0), (0, 1, 0)])
        three = make_chain([(0, 0, 0), (0, 0.8, 0), (0, 1.0, 0)], name_prefix="other")
        assert abs(compute_scale(two, three) - 1.8) < 1e-9

    def test_flat_skeleton_falls_back_to_bone_length(self):
        flat_a = make_chain([(0, 0, 0), (1, 0, 0), (2, 0, 0)])
        flat_b = make_chain([(0, 0, 0), (1.5, 0, 0), (0, 0, 1.5)], name_prefix="b")
        assert abs(compute_scale(flat_a, flat_b) - 1.0) < 1e-9

    def test_degenerate_skeleton(self):
        dot = Skeleton((Joint("only", None, (0, 0, 0)),))
        with pytest.raises(RetargetError, match="degenerate"):
            compute_scale(dot, demo_skeleton())


class TestMapBones:
    def test_identical_skeletons_pair_namesakes(self):
        skeleton = demo_skeleton()
        pairs = map_bones(skeleton, skeleton)
        assert pairs == [(k, k) for k in range(len(skeleton))]

    def test_alias_table_pairs_classic_names(self):
        source = motion_source_skeleton()
        target = demo_skeleton()
        pairs = dict(map_bones(source, target))
        assert pairs[source.index_of("LeftUpLeg")] == target.index_of("thigh.L")
        assert pairs[source.index_of("Spine1")] == target.index_of("chest")
        assert len(pairs) == len(source)

    def test_missing_head_reported(self):
        source = motion_source_skeleton()
        drop = source.index_of("Head")  # leaf joint; reindex parents past it
        joints = []
        for k, j in enumerate(source.joints):
            if k == drop:
                continue
            parent = j.parent
            if parent is not None and parent > drop:
                parent -= 1
            joints.append(Joint(j.name, parent, j.rest_offset, j.end_site))
        headless = Skeleton(tuple(joints))
        with pytest.raises(UnmappedBoneError) as info:
            map_bones(headless, demo_skeleton())
        assert "head" in info.value.missing

    def test_duplicate_override_conflict(self):
        skeleton = demo_skeleton()
        with pytest.raises(RetargetError, match="conflict"):
            map_bones(skeleton, skeleton, overrides={"hips": "hips", "spine": "hips"})

    def test_override_unknown_joint(self):
        skeleton = demo_skeleton()
        with pytest.raises(RetargetError, match="not in source"):
            map_bones(skeleton, skeleton, overrides={"nosuch": "hips"})

    def test_cmu_style_hip_joint_prefers_upleg(self):
        # LHipJoint and LeftUpLeg share the thigh alias group; the canonical
        # name must win the target thigh.
        source = motion_source_skeleton()
        joints = list(source.joints)
        upleg = source.index_of("LeftUpLeg")
        hip_helper = Joint("LHipJoint", joints[upleg].parent, (0.01, -0.01, 0.0))
        joints.insert(upleg, hip_helper)
        rewired = []
        for k, j in enumerate(joints):
            parent = j.parent
            if parent is not None and parent >= upleg and j.name != "LHipJoint":
                parent += 1 if parent >= upleg else 0
            rewired.append(Joint(j.name, parent, j.rest_offset, j.end_site))
        # fix LeftUpLeg's parent to remain the hips, not the helper
        source2 = Skeleton(tuple(rewired))
        pairs = dict(map_bones(source2, demo_skeleton(), strict=False))
        assert pairs.get(source2.index_of("LeftUpLeg")) == demo_skeleton().index_of("thigh.L")
        assert source2.index_of("LHipJoint") not in pairs

    def test_user_alias_groups(self):
        source = make_chain([(0, 0, 0), (0, 1, 0)], name_prefix="alpha")
        target = make_chain([(0, 0, 0), (0, 1, 0)], name_prefix="beta")
        pairs = map_bones(source, target, aliases=[["alpha1", "beta1"]], strict=False)
        assert (1, 1) in pairs

    def test_roots_paired_structurally(self):
        source = make_chain([(0, 0, 0), (0, 1, 0)], name_prefix="a")
        target = make_chain([(0, 0, 0), (0, 1, 0)], name_prefix="b")
        pairs = map_bones(source, target, strict=False)
        assert (0, 0) in pairs


class TestComputeAlignments:
    def test_identical_skeletons_identity(self):
        skeleton = demo_skeleton()
        pairs = map_bones(skeleton, skeleton)
        alignments = compute_alignments(skeleton, skeleton, pairs)
        for a in alignments:
            assert quat.allclose(a, quat.IDENTITY, atol=1e-9)

    def test_rigidly_rotated_target(self):
        # Bones must not be parallel to world up or the secondary-axis
        # fallback changes the frames; tilt a chain away from +Y.
        source = make_chain([(0, 0, 0), (0.3, 1, 0.1), (0.25, 0.9, -0.2), (0.4, 0.8, 0.3)])
        ry = quat.from_axis_angle((0, 1, 0), np.pi / 2)
        target = rotate_skeleton(source, ry)
        pairs = map_bones(source, target, strict=False)
        alignments = compute_alignments(source, target, pairs)
        for a in alignments:
            assert quat.allclose(a, ry, atol=1e-9)

    def test_y_bone_onto_x_bone(self):
        source = make_chain([(0, 0, 0), (0, 1, 0)], name_prefix="s")
        target = make_chain([(0, 0, 0), (1, 0, 0)], name_prefix="t")
        pairs = map_bones(source, target, strict=False)
        alignments = compute_alignments(source, target, pairs)
        a = alignments[0]
        assert np.allclose(quat.rotate(a, (0, 1, 0)), (1, 0, 0), atol=1e-9)
        # the full source frame lands on the target frame
        from avatar_forge.retarget import _bone_frame, _primary_direction

        f_src = _bone_frame(_primary_direction(source, 0))
        f_tgt = _bone_frame(_primary_direction(target, 0))
        assert np.allclose(quat.to_matrix(a) @ f_src, f_tgt, atol=1e-9)

    def test_zero_length_bone_error(self):
        source = make_chain([(0, 0, 0), (0, 0, 0)])
        with pytest.raises(RetargetError, match="degenerate bone"):
            compute_alignments(source, source, [(0, 0), (1, 1)])


class TestRetargetClip:
    def test_identity_retarget(self):
        clip = sway_clip(frames=50)
        target = clip.skeleton
        rmap = build_retarget_map(clip.skeleton, target)
        motion = retarget_clip(clip, target, rmap)
        assert motion.frame_time == clip.frame_time
        for f in range(clip.frame_count):
            source_pose = pose_at_frame(clip, f)
            out = motion.poses[f]
            assert np.allclose(out.root_translation, source_pose.root_translation, atol=1e-6)
            diff = np.minimum(
                np.abs(out.local_rotations - source_pose.local_rotations).max(axis=1),
                np.abs(out.local_rotations + source_pose.local_rotations).max(axis=1),
            )
            assert diff.max() < 1e-6

    def test_double_scale_world_positions(self):
        clip = sway_clip(frames=30)
        target = clip.skeleton.scaled(2.0)
        rmap = build_retarget_map(clip.skeleton, target)
        assert abs(rmap.scale - 2.0) < 1e-9
        motion = retarget_clip(clip, target, rmap)
        for f in range(clip.frame_count):
            source_pose = pose_at_frame(clip, f)
            src = joint_world_positions(clip.skeleton, source_pose)
            tgt = joint_world_positions(target, motion.poses[f])
            assert np.allclose(tgt, 2.0 * src, atol=1e-4)

    def test_single_bone_direction_transfer(self):
        # Source bone rests along +Y (tilted), target along +X (tilted);
        # after retargeting, the animated world direction must transfer.
        source = make_chain([(0, 0, 0), (0.2, 1, 0)], name_prefix="src")
        target = make_chain([(0, 0, 0), (1, 0.2, 0)], name_prefix="tgt")
        rng = np.random.default_rng(7)
        poses = []
        for _ in range(20):
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            rotations = np.stack([q, quat.IDENTITY])
            poses.append(Pose(np.zeros(3), rotations))
        clip = clip_from_poses(source, poses, frame_time=1 / 24)
        rmap = build_retarget_map(source, target, strict=False)
        motion = retarget_clip(clip, target, rmap)
        for f in range(clip.frame_count):
            src_pos = joint_world_positions(source, pose_at_frame(clip, f))
            tgt_pos = joint_world_positions(target, motion.poses[f])
            d_src = src_pos[1] - src_pos[0]
            d_tgt = tgt_pos[1] - tgt_pos[0]
            d_src /= np.linalg.norm(d_src)
            d_tgt /= np.linalg.norm(d_tgt)
            assert np.allclose(d_tgt, d_src, atol=1e-4)

    def test_unmapped_target_joints_stay_at_rest(self):
        source = motion_source_skeleton()
        target_joints = list(demo_skeleton().joints)
        target_joints.append(Joint("tail", 0, (0.0, -0.1, -0.3)))
        target = Skeleton(tuple(target_joints))
        clip = sway_clip(frames=5)
        rmap = build_retarget_map(clip.skeleton, target)
        tail = target.index_of("tail")
        assert tail in rmap.unmapped_target
        motion = retarget_clip(clip, target, rmap)
        for pose in motion.poses:
            assert quat.allclose(pose.local_rotations[tail], quat.IDENTITY, atol=0)

    def test_extra_intermediate_target_joints(self):
        # Target splits the source's spine bone in two; the extra link is
        # unmapped and the nearest-mapped-ancestor alignment carries the
        # rotation across it. Collinear rest chains transfer positions
        # exactly.
        source = Skeleton((
            Joint("root", None, (0, 0, 0)),
            Joint("mid", 0, (0.2, 1.0, 0.0)),
            Joint("tip", 1, (0.2, 1.0, 0.0), end_site=(0.1, 0.5, 0.0)),
        ))
        target = Skeleton((
            Joint("root", None, (0, 0, 0)),
            Joint("extra", 0, (0.1, 0.5, 0.0)),
            Joint("mid", 1, (0.1, 0.5, 0.0)),
            Joint("tip", 2, (0.2, 1.0, 0.0), end_site=(0.1, 0.5, 0.0)),
        ))
        rng = np.random.default_rng(19)
        poses = []
        for _ in range(10):
            q = rng.normal(size=(3, 4))
            q /= np.linalg.norm(q, axis=1, keepdims=True)
            poses.append(Pose(np.zeros(3), q))
        clip = clip_from_poses(source, poses, frame_time=1 / 30)
        rmap = build_retarget_map(source, target, strict=False)
        assert target.index_of("extra") in rmap.unmapped_target
        motion = retarget_clip(clip, target, rmap)
        for f in range(clip.frame_count):
            src = joint_world_positions(source, pose_at_frame(clip, f))
            tgt = joint_world_positions(target, motion.poses[f])
            assert np.allclose(tgt[target.index_of("mid")], src[1], atol=1e-9)
            assert np.allclose(tgt[target.index_of("tip")], src[2], atol=1e-9)

    def test_frame_independence(self):
        clip = sway_clip(frames=10)
        target = demo_skeleton()
        rmap = build_retarget_map(clip.skeleton, target)
        motion = retarget_clip(clip, target, rmap)
        for f in range(clip.frame_count):
            single = retarget_pose(pose_at_frame(clip, f), target, rmap)
            assert np.array_equal(single.local_rotations, motion.poses[f].local_rotations)
            assert np.array_equal(single.root_translation, motion.poses[f].root_translation)

    def test_output_quaternions_unit(self):
        clip = sway_clip(frames=20)
        target = demo_skeleton()
        rmap = build_retarget_map(clip.skeleton, target)
        for pose in retarget_clip(clip, target, rmap).poses:
            assert np.allclose(np.linalg.norm(pose.local_rotations, axis=1), 1, atol=1e-9)

    def test_stale_map_error(self):
        clip = sway_clip(frames=3)
        other = sway_clip(frames=3)
        target = demo_skeleton()
        rmap = build_retarget_map(motion_source_skeleton(scale=2.0), target)
        with pytest.raises(RetargetError, match="stale"):
            retarget_clip(clip, target, rmap)
        assert skeleton_signature(clip.skeleton) == skeleton_signature(other.skeleton)


class TestMapConfig:
    def test_load_map_file(self, tmp_path):
        path = tmp_path / "map.json"
        path.write_text(
            '{"overrides": {"Hips": "hips"}, "aliases": [["a", "b"]],'
            ' "primary_child": {"hips": "spine"}, "strict": false}'
        )
        config = load_map_config(path)
        assert config.overrides == {"Hips": "hips"}
        assert config.aliases == (("a", "b"),)
        assert config.primary_child == {"hips": "spine"}
        assert config.strict is False

    def test_malformed_map_file(self, tmp_path):
        path = tmp_path / "map.json"
        path.write_text('{"aliases": {"not": "a list"}}')
        with pytest.raises(RetargetError, match="aliases"):
            load_map_config(path)
