import math

import numpy as np
import pytest
from hypothesis import settings

from pdo_ik.robot import DHRow, JointSpec, RobotModel, spheroid_semi_major

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def translate(x=0.0, y=0.0, z=0.0):
    T = np.eye(4)
    T[:3, 3] = (x, y, z)
    return T


def planar_2r(limits=((-math.pi, math.pi), (-math.pi, math.pi)), radius=0.05):
    """Two unit links in the x-y plane; end effector one unit past joint 2."""
    semi = spheroid_semi_major(1.0, radius)
    joints = (
        JointSpec(DHRow(0.0, 0.0, 0.0), *limits[0], radius, semi),
        JointSpec(DHRow(0.0, 1.0, 0.0), *limits[1], radius, radius),
    )
    return RobotModel(joints, np.eye(4), translate(x=1.0), "planar_2r")


@pytest.fixture
def planar():
    return planar_2r()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
