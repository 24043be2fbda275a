import numpy as np
import pytest

from nestgan import ActivationSpec, ProjectionSets, RngStream, TargetSpec
from nestgan.config import random_spd_target


@pytest.fixture
def rng():
    return RngStream(2024)


@pytest.fixture
def sigmoid_target_d2():
    return TargetSpec(np.diag([1.5, 1.0]), ActivationSpec.sigmoid(2), 0.55)


@pytest.fixture
def sigmoid_target_d3():
    S = random_spd_target(0.5, 3, RngStream(7, stream_id=3))
    return TargetSpec(S, ActivationSpec.sigmoid(3), 0.5)


@pytest.fixture
def proj_sets_d3():
    return ProjectionSets.from_closeness(0.5, 3)
