import numpy as np
import pytest

from avatar_forge.demo import build_demo_library
from avatar_forge.geometry import Joint, Pose, Skeleton


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def demo_library_root(tmp_path_factory):
    """Shared demo asset library (coarse body for speed)."""
    root = tmp_path_factory.mktemp("demo-library")
    return build_demo_library(root, subdivisions=2)


def make_chain(offsets, name_prefix="joint", end_site=None) -> Skeleton:
    """Linear chain skeleton from a list of offsets (root first)."""
    joints = []
    for k, off in enumerate(offsets):
        parent = None if k == 0 else k - 1
        site = end_site if (k == len(offsets) - 1 and end_site is not None) else None
        joints.append(Joint(f"{name_prefix}{k}", parent, np.asarray(off, dtype=float), site))
    return Skeleton(tuple(joints))


def random_unit_quaternions(rng, count):
    q = rng.normal(size=(count, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def random_pose(rng, skeleton, translation_scale=1.0) -> Pose:
    return Pose(
        rng.normal(size=3) * translation_scale,
        random_unit_quaternions(rng, len(skeleton)),
    )
