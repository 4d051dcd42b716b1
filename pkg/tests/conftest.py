import numpy as np
import pytest

from scvx_toolkit.geometry import Ball

from tests.problems import make_planar_problem


@pytest.fixture
def free_problem():
    return make_planar_problem()


@pytest.fixture
def ball_problem():
    return make_planar_problem(obstacles=(Ball(center=np.array([3.0, 0.2]), radius=1.0),))
