import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from avatar_forge import quaternions as quat
from avatar_forge.bvh import (
    BvhError,
    BvhParseError,
    ChannelSpec,
    MotionClip,
    clip_from_poses,
    parse_bvh,
    pose_at_frame,
    write_bvh,
)
from avatar_forge.geometry import joint_world_positions

MINIMAL = """HIERARCHY
ROOT Hips
{
\tOFFSET 0.000000 0.000000 0.000000
\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
\tJOINT Chest
\t{
\t\tOFFSET 0.000000 1.000000 0.000000
\t\tCHANNELS 3 Zrotation Xrotation Yrotation
\t\tEnd Site
\t\t{
\t\t\tOFFSET 0.000000 0.500000 0.000000
\t\t}
\t}
}
MOTION
Frames: 1
Frame Time: 0.033333
0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000
"""


def random_clip(rng, max_joints=20, max_frames=50):
    joint_count = int(rng.integers(2, max_joints + 1))
    names = [f"bone{k}" for k in range(joint_count)]
    parents = [None] + [int(rng.integers(0, k)) for k in range(1, joint_count)]
    orders = ["Zrotation Xrotation Yrotation", "Xrotation Yrotation Zrotation",
              "Zrotation Yrotation Xrotation"]
    channels = []
    for k in range(joint_count):
        order = orders[int(rng.integers(0, len(orders)))].split()
        if k == 0:
            channels.append(tuple(["Xposition", "Yposition", "Zposition"] + order))
        elif rng.random() < 0.15:
            channels.append(())
        else:
            channels.append(tuple(order))
    from avatar_forge.geometry import Joint, Skeleton

    joints = []
    for k in range(joint_count):
        end = rng.normal(size=3) if rng.random() < 0.3 else None
        joints.append(Joint(names[k], parents[k], rng.uniform(-2, 2, size=3), end))
    skeleton = Skeleton(tuple(joints))
    spec = ChannelSpec(tuple(channels))
    frame_count = int(rng.integers(1, max_frames + 1))
    frames = np.zeros((frame_count, spec.total))
    cursor = 0
    for ch in channels:
        for name in ch:
            if "rotation" in name:
                frames[:, cursor] = rng.uniform(-180, 180, size=frame_count)
            else:
                frames[:, cursor] = rng.uniform(-10, 10, size=frame_count)
            cursor += 1
    return MotionClip(skeleton=skeleton, channels=spec, frame_time=float(rng.uniform(0.01, 0.1)),
                      frames=frames)


class TestParse:
    def test_minimal_fixture(self):
        clip = parse_bvh(MINIMAL)
        assert len(clip.skeleton) == 2
        assert clip.skeleton.names == ("Hips", "Chest")
        assert clip.channels.total == 9
        assert clip.frame_count == 1
        assert np.allclose(clip.skeleton.joints[1].rest_offset, (0, 1, 0))
        assert np.allclose(clip.skeleton.joints[1].end_site, (0, 0.5, 0))
        pose = pose_at_frame(clip, 0)
        assert np.allclose(pose.root_translation, 0)
        assert quat.allclose(pose.local_rotations, np.tile(quat.IDENTITY, (2, 1)), atol=1e-12)

    def test_crlf_and_case_insensitive(self):
        text = MINIMAL.replace("HIERARCHY", "hierarchy").replace("MOTION", "Motion")
        text = text.replace("\n", "\r\n")
        clip = parse_bvh(text)
        assert len(clip.skeleton) == 2

    def test_missing_hierarchy(self):
        with pytest.raises(BvhParseError, match="HIERARCHY") as info:
            parse_bvh("ROOT Hips\n{\n}\n")
        assert info.value.line == 1

    def test_unbalanced_braces(self):
        broken = MINIMAL.replace("\t}\n}\nMOTION", "\t}\nMOTION")
        with pytest.raises(BvhParseError):
            parse_bvh(broken)

    def test_non_numeric_offset(self):
        broken = MINIMAL.replace("OFFSET 0.000000 1.000000", "OFFSET zero 1.000000")
        with pytest.raises(BvhParseError, match="offset") as info:
            parse_bvh(broken)
        assert info.value.line == 8

    def test_row_value_count_mismatch(self):
        broken = MINIMAL.rstrip("\n") + " 9.000000\n"
        with pytest.raises(BvhParseError, match="expected 9") as info:
            parse_bvh(broken)
        assert info.value.line == 19

    def test_frame_count_mismatch_extra_row(self):
        row = "0.000000 " * 8 + "0.000000"
        text = MINIMAL.replace("Frames: 1", "Frames: 2") + row + "\n" + row + "\n"
        with pytest.raises(BvhParseError, match="frame-count mismatch") as info:
            parse_bvh(text)
        assert info.value.line == 21

    def test_frame_count_mismatch_missing_rows(self):
        text = MINIMAL.replace("Frames: 1", "Frames: 3")
        with pytest.raises(BvhParseError, match="frame-count mismatch"):
            parse_bvh(text)

    def test_duplicate_joint_names_rejected(self):
        text = MINIMAL.replace("JOINT Chest", "JOINT Hips")
        with pytest.raises(BvhParseError, match="collides"):
            parse_bvh(text)

    def test_bad_rotation_channel_set(self):
        text = MINIMAL.replace(
            "CHANNELS 3 Zrotation Xrotation Yrotation",
            "CHANNELS 3 Zrotation Zrotation Yrotation",
        ).replace("Frames: 1", "Frames: 1")
        with pytest.raises(BvhParseError, match="duplicate|permutation"):
            parse_bvh(text)


class TestPoseAtFrame:
    def test_all_zero_frame_identity(self):
        clip = parse_bvh(MINIMAL)
        pose = pose_at_frame(clip, 0)
        assert quat.allclose(pose.local_rotations, np.tile(quat.IDENTITY, (2, 1)), atol=1e-12)

    def test_single_axis_90(self):
        text = MINIMAL.replace(
            "0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000",
            "0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 90.000000 0.000000 0.000000",
        )
        pose = pose_at_frame(parse_bvh(text), 0)
        expected = quat.from_axis_angle((0, 0, 1), np.pi / 2)
        assert quat.allclose(pose.local_rotations[1], expected, atol=1e-9)

    def test_composed_axes_match_matrix_oracle(self):
        text = MINIMAL.replace(
            "0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000",
            "0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 90.000000 90.000000 0.000000",
        )
        pose = pose_at_frame(parse_bvh(text), 0)
        oracle = Rotation.from_euler("Z", 90, degrees=True) * Rotation.from_euler("X", 90, degrees=True)
        ours = quat.to_matrix(pose.local_rotations[1])
        assert np.allclose(ours, oracle.as_matrix(), atol=1e-9)

    def test_root_translation_channels(self):
        text = MINIMAL.replace(
            "0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000",
            "1.000000 2.000000 3.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000",
        )
        pose = pose_at_frame(parse_bvh(text), 0)
        assert np.allclose(pose.root_translation, (1, 2, 3))

    def test_out_of_range_frame(self):
        clip = parse_bvh(MINIMAL)
        with pytest.raises(IndexError):
            pose_at_frame(clip, 1)

    def test_unit_norm_quaternions(self, rng):
        clip = random_clip(rng)
        for f in range(clip.frame_count):
            pose = pose_at_frame(clip, f)
            assert np.allclose(np.linalg.norm(pose.local_rotations, axis=1), 1, atol=1e-9)


class TestWrite:
    def test_minimal_round_trip_exact_structure(self):
        clip = parse_bvh(MINIMAL)
        again = parse_bvh(write_bvh(clip))
        assert again.skeleton.names == clip.skeleton.names
        assert np.array_equal(again.skeleton.joints[1].rest_offset, clip.skeleton.joints[1].rest_offset)
        assert again.channels.joints == clip.channels.joints

    def test_write_is_canonical_fixed_point(self):
        clip = parse_bvh(MINIMAL)
        assert write_bvh(clip) == MINIMAL

    def test_frame_time_round_trip(self):
        clip = parse_bvh(MINIMAL.replace("0.033333", "0.033333"))
        target = MotionClip(clip.skeleton, clip.channels, 0.0333333, clip.frames)
        again = parse_bvh(write_bvh(target))
        assert abs(again.frame_time - 0.0333333) < 1e-6

    def test_random_clip_round_trip_drift(self, rng):
        # Writers nest depth-first, so compare per joint by name: generated
        # skeletons need not be in preorder.
        def per_joint(clip):
            starts = np.concatenate([[0], np.cumsum([len(c) for c in clip.channels.joints])])
            return {
                joint.name: (
                    clip.channels.joints[k],
                    joint.rest_offset,
                    clip.frames[:, starts[k] : starts[k + 1]],
                )
                for k, joint in enumerate(clip.skeleton.joints)
            }

        for _ in range(100):
            clip = random_clip(rng)
            again = parse_bvh(write_bvh(clip))
            ours, theirs = per_joint(clip), per_joint(again)
            assert set(ours) == set(theirs)
            for name, (channels, offset, values) in ours.items():
                channels2, offset2, values2 = theirs[name]
                assert channels == channels2
                assert np.allclose(offset, offset2, atol=1e-4)
                assert np.allclose(values, values2, atol=1e-4)

    def test_write_parse_write_byte_stable(self, rng):
        for _ in range(25):
            clip = random_clip(rng)
            first = write_bvh(clip)
            second = write_bvh(parse_bvh(first))
            assert first == second

    def test_tiny_frame_time_rejected(self):
        clip = parse_bvh(MINIMAL)
        with pytest.raises(BvhError, match="resolution"):
            write_bvh(MotionClip(clip.skeleton, clip.channels, 1e-9, clip.frames))


class TestClipFromPoses:
    def test_round_trip_through_euler(self, rng):
        from conftest import make_chain, random_pose

        chain = make_chain(rng.normal(size=(5, 3)))
        poses = [random_pose(rng, chain) for _ in range(10)]
        clip = clip_from_poses(chain, poses, frame_time=1 / 30)
        for f, pose in enumerate(poses):
            recovered = pose_at_frame(clip, f)
            assert np.allclose(
                joint_world_positions(chain, recovered),
                joint_world_positions(chain, pose),
                atol=1e-9,
            )


class TestFuzz:
    def test_mutated_inputs_never_crash(self, rng):
        base = MINIMAL
        for _ in range(1000):
            data = list(base)
            for _ in range(int(rng.integers(1, 6))):
                op = rng.integers(0, 3)
                pos = int(rng.integers(0, len(data)))
                if op == 0 and len(data) > 1:
                    del data[pos]
                elif op == 1:
                    data.insert(pos, chr(int(rng.integers(32, 127))))
                else:
                    data[pos] = chr(int(rng.integers(32, 127)))
            try:
                parse_bvh("".join(data))
            except BvhParseError:
                pass
