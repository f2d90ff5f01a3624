import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from solo import RigidMotion


def random_motion(rng, t_scale=1.0):
    R = Rotation.random(random_state=rng).as_matrix()
    return RigidMotion(R, rng.uniform(-t_scale, t_scale, 3))


def random_points(rng, m=30, scale=1.0):
    return rng.uniform(-scale / 2, scale / 2, (3, m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
