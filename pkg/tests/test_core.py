import math

import numpy as np
import pytest

from mesa_waves.core import (BracketError, DomainError, GridSpec, ParameterError, SampledFunction,
                             WaveParams, critical_speed, cumulative_integral, find_root, integrate,
                             interpolate)


def test_interpolate_linear_data():
    f = SampledFunction([0.0, 1.0], [0.0, 1.0])
    assert interpolate(f, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_interpolate_nodal_exactness():
    x = np.linspace(0, 1, 11)
    f = SampledFunction(x, np.sin(3 * x))
    for k in (0, 4, 10):
        assert interpolate(f, x[k]) == f.values[k]


def test_interpolate_exp_65_nodes():
    x = np.linspace(0, 1, 65)
    f = SampledFunction(x, np.exp(x))
    assert abs(interpolate(f, 0.3) - math.exp(0.3)) < 1e-8


def test_interpolate_outside_range():
    f = SampledFunction([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(DomainError):
        interpolate(f, 1.5)


def test_sampled_function_rejects_unsorted():
    with pytest.raises(Exception):
        SampledFunction([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])


def test_integrate_constants_and_identity():
    f = SampledFunction([0.0, 1.0, 2.0], [1.0, 1.0, 1.0])
    assert integrate(f, 0, 2) == pytest.approx(2.0, abs=1e-14)
    g = SampledFunction(np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    assert integrate(g, 0, 1) == pytest.approx(0.5, abs=1e-14)
    assert integrate(g, 0, 1, method="trapezoid") == pytest.approx(0.5, abs=1e-14)
    assert integrate(g, 1, 0) == pytest.approx(-0.5, abs=1e-14)


def test_integrate_exp_129_nodes():
    x = np.linspace(0, 1, 129)
    assert abs(integrate(SampledFunction(x, np.exp(x)), 0, 1) - (math.e - 1)) < 1e-8


def test_cumulative_integral_matches_closed_form():
    x = np.linspace(0, 2, 401)
    run = cumulative_integral(x, np.cos(x))
    assert np.max(np.abs(run - np.sin(x))) < 1e-9


def test_find_root_examples():
    assert find_root(lambda x: x - 1, 0, 2) == pytest.approx(1.0, abs=1e-12)
    assert find_root(lambda x: x * x - 2, 1, 2) == pytest.approx(math.sqrt(2), abs=1e-12)
    oracle = (1 - math.sqrt(1 - 0.16)) / 2
    assert find_root(lambda x: x * (1 - x) - 0.04, 0, 0.5) == pytest.approx(oracle, abs=1e-12)


def test_find_root_without_sign_change():
    with pytest.raises(BracketError):
        find_root(lambda x: x * x + 1, -1, 1)


def test_critical_speed_values():
    assert critical_speed(1) == pytest.approx(0.70710678, abs=1e-8)
    assert critical_speed(3) == pytest.approx(0.86602540, abs=1e-8)
    vals = [critical_speed(g) for g in (2, 10, 100, 1e6)]
    assert all(np.diff(vals) > 0) and vals[-1] < 1 and 1 - vals[-1] < 1e-6


def test_wave_params_validation():
    with pytest.raises(ParameterError):
        WaveParams(5, 0.5)
    with pytest.raises(ParameterError):
        WaveParams(1.0, 2.0)
    with pytest.raises(ParameterError):
        WaveParams(5, float("nan"))
    p = WaveParams(5, 2)
    assert p.critical == pytest.approx(critical_speed(5))


def test_grid_spec():
    g = GridSpec.uniform(-1, 1, 5)
    assert np.allclose(g.nodes(), [-1, -0.5, 0, 0.5, 1])
    a = GridSpec.adaptive(0, 1, 0.1)
    nodes = a.nodes(lambda x: 10 * np.asarray(x) ** 2)
    assert nodes[0] == 0 and nodes[-1] == 1 and np.all(np.diff(nodes) > 0)
    with pytest.raises(ParameterError):
        GridSpec(1.0, 0.0, n=3)
    with pytest.raises(ParameterError):
        GridSpec(0.0, 1.0)
