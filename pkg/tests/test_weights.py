import dataclasses
import math

import numpy as np
import pytest

from mesa_waves.core import GridSpec, WaveParams
from mesa_waves.landmarks import locate_landmarks
from mesa_waves.spectral import scaled
from mesa_waves.tw_profile import launch_slope, solve_profile
from mesa_waves.weights import (LOG_W_MAX, b_from_flux, build_phi, build_w0, build_weights,
                                comparison_constant, congested_decay_slope,
                                double_exponential_slope, linearized_coefficients,
                                weight_ode_residual)


def test_w0_is_one_at_xi_minus(weight):
    w = weight(10, 2)
    out = w.evaluate([w.landmarks.xi_minus])
    assert out["log_w0"][0] == 0.0
    assert math.exp(out["log_w0"][0]) == 1.0


def test_build_w0_returns_sampled_weight(table, landmarks):
    w0, K = build_w0(table(10, 2), landmarks(10, 2))
    assert np.all(w0.values > 0)
    assert K == pytest.approx(weight_K := K) and weight_K > 0
    assert np.log(w0.values).max() <= LOG_W_MAX


def test_weight_ode_residual_under_refinement():
    p = WaveParams(10, 2)
    res = []
    for ds in (2e-3, 1e-3):
        t = solve_profile(p, GridSpec.adaptive(-15, 15, ds))
        res.append(weight_ode_residual(build_weights(t)))
    assert res[1] < res[0] and res[0] <= 1e-5


def test_residual_detects_wrong_weight(weight):
    w = weight(10, 2)
    flat = dataclasses.replace(w, log_w0=np.zeros_like(w.log_w0), w0=np.ones_like(w.w0))
    assert weight_ode_residual(flat) > 0.1


def test_residual_invariant_under_rescaling(weight):
    w = weight(10, 2)
    # the constant ln 2 only perturbs the differenced logarithm at roundoff level
    assert weight_ode_residual(scaled(w, 2.0)) == pytest.approx(weight_ode_residual(w), abs=1e-10)


def test_congested_decay_rate(weight):
    for g in (5, 10):
        expect = 2.0 * launch_slope(g, 2.0) + 2.0 / g
        assert congested_decay_slope(weight(g, 2)) == pytest.approx(expect, rel=5e-3)


def test_double_exponential_growth(weight):
    for g in (5, 10):
        k = double_exponential_slope(weight(g, 2))
        assert 0.5 * g <= k <= 2.0 * g


@pytest.mark.parametrize("gamma", [5, 10, 20])
def test_phi_properties(weight, gamma):
    w = weight(gamma, 2)
    assert np.all(np.diff(w.phi) <= 0)
    assert np.all(w.phi >= 1.0) and np.all(w.phi <= 2.0)
    assert w.phi[0] > 2.0 - w.extras["total_variation"] - 1e-12
    assert w.extras["total_variation"] <= 1.0
    assert np.allclose(w.w, w.w0 * w.phi, rtol=1e-14)


def test_phi_restarts_from_two(weight):
    w = weight(10, 2)
    phi, delta, info = build_phi(w)
    assert info["xi_min_phi"] == -20.0
    assert 2.0 - phi.values[0] <= info["total_variation"]
    assert delta == pytest.approx(info["delta0"] / math.sqrt(10))


def test_delta_scaling_stable(weight):
    vals = [weight(g, 2).delta_gamma * math.sqrt(g) for g in (10, 20, 40)]
    assert max(vals) / min(vals) <= 2.0


def test_coefficients_far_left(table):
    a, b = linearized_coefficients(table(10, 2))
    assert a.values[0] == pytest.approx(10.0, rel=1e-4)


def test_b_at_inflection(weight):
    w = weight(10, 2)
    lm = w.landmarks
    out = w.evaluate([lm.xi_zero])
    ev = out["ev"]
    g = 10.0
    pure = -2 * g * g * ev["N"][0] ** (g - 1) * ev["dN"][0]
    assert out["b"][0] == pytest.approx(pure, rel=1e-6)


def test_b_two_forms_agree(table):
    t = table(10, 2)
    _, b = linearized_coefficients(t)
    alt = b_from_flux(t)
    k = int(np.argmin(np.abs(t.xi)))
    assert b.values[k] == pytest.approx(alt.values[k], rel=1e-10)
    m = np.abs(t.xi) < 5
    assert np.max(np.abs(b.values[m] - alt.values[m]) / (1 + np.abs(alt.values[m]))) < 1e-9


def test_comparison_constant_finite(weight):
    w = weight(10, 2)
    C = comparison_constant(w)
    assert 0 < C < np.inf
    assert np.all(np.sqrt(10) * w.xi - w.log_w <= math.log(C) + 1e-12)


def test_table_rows_and_sidecar(weight):
    w = weight(5, 2)
    assert w.to_rows().shape == (len(w), 6)
    side = w.sidecar()
    assert side["gamma"] == 5 and side["K"] == w.K


def test_k_definition(table, landmarks):
    lm = landmarks(10, 2)
    ev = table(10, 2).profile.evaluate([lm.xi_minus])
    _, K = build_w0(table(10, 2), lm)
    assert K == pytest.approx(1.0 / (ev["P"][0] * ev["dN"][0] ** 2), rel=1e-10)


@pytest.mark.xfail(strict=True, reason="K / gamma^1.5 is still far from its asymptotic regime at "
                                       "gamma = 10; see the decisions ledger")
def test_k_scaling(weight):
    r = [weight(g, 2).K / g ** 1.5 for g in (10, 20, 40)]
    assert max(r) / min(r) <= 4.0
