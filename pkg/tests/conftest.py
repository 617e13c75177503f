import functools

import pytest

from mesa_waves.core import WaveParams
from mesa_waves.landmarks import locate_landmarks
from mesa_waves.tw_profile import solve_profile
from mesa_waves.weights import build_weights


@functools.lru_cache(maxsize=None)
def table_for(gamma, speed):
    return solve_profile(WaveParams(float(gamma), float(speed)))


@functools.lru_cache(maxsize=None)
def landmarks_for(gamma, speed):
    return locate_landmarks(table_for(gamma, speed))


@functools.lru_cache(maxsize=None)
def weight_for(gamma, speed):
    return build_weights(table_for(gamma, speed), landmarks_for(gamma, speed))


@pytest.fixture
def table():
    return table_for


@pytest.fixture
def landmarks():
    return landmarks_for


@pytest.fixture
def weight():
    return weight_for
