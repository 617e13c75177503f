import math
from types import SimpleNamespace

import numpy as np
import pytest

from mesa_waves.core import GridSpec, ParameterError, WaveParams
from mesa_waves.landmarks import q_minus, q_plus
from mesa_waves.tw_profile import (launch_slope, ode_residual, phase_rhs, sharp_front,
                                   solve_profile)


def test_normalization_gamma10(table):
    t = table(10, 2)
    N0 = t.profile.evaluate([0.0])["N"][0]
    assert N0 == pytest.approx(10 ** -0.1, abs=1e-10)
    assert N0 == pytest.approx(0.79433, abs=1e-5)


@pytest.mark.parametrize("gamma,speed", [(5, 2), (10, 2), (10, 1.5), (20, 2)])
def test_table_invariants(table, gamma, speed):
    t = table(gamma, speed)
    assert np.all(np.diff(t.N) < 0)
    assert np.all((t.N > 0) & (t.N < 1))
    assert np.all(np.diff(t.J) <= 1e-9)
    assert np.all((t.J >= 0) & (t.J <= speed))
    assert np.all((t.dP <= 0) & (t.dP >= -speed - 1e-9))
    P0 = t.profile.evaluate([0.0])["P"][0]
    assert P0 == pytest.approx(1.0 / gamma, abs=1e-12)


def test_flux_limits_gamma10(table):
    t = table(10, 2)
    assert abs(t.J[0] - 2.0) < 1e-4
    ev = t.profile.evaluate([-11.0, -10.0, 30.0])
    assert abs(ev["J"][0] - 2.0) < 1e-4
    # c - J decays like exp(lambda xi) on the congested side; at xi = -10
    # the deficit of the exact wave is 1.25e-4
    lam = launch_slope(10, 2)
    ratio = (2.0 - ev["J"][1]) / (2.0 - ev["J"][0])
    assert ratio == pytest.approx(math.exp(lam), rel=1e-3)
    assert 0 < ev["J"][2] < 1e-6


def test_log_slope_tends_to_minus_one_over_c(table):
    t = table(10, 2)
    ev = t.profile.evaluate([10.0])
    assert -math.exp(ev["rho"][0]) == pytest.approx(-0.5, abs=1e-3)


def test_minimum_slope_on_gamma_minus(table, landmarks):
    p = WaveParams(40, 2)
    lm = landmarks(40, 2)
    assert lm.min_slope == pytest.approx(q_minus(lm.N_zero, p), rel=1e-8)
    assert lm.min_slope <= float(np.min(table(40, 2).dN)) * (1 - 1e-9)


def test_sharp_front_values():
    assert sharp_front(2, 0.0) == 0.0
    assert sharp_front(2, -60.0) == pytest.approx(1.0)
    assert sharp_front(2, -1.0) == pytest.approx((1 - math.exp(-math.sqrt(2 / 3))) ** 0.5, abs=1e-14)
    assert sharp_front(2, 1.0) == 0.0


def test_launch_slope_root():
    lam = launch_slope(5, 2)
    assert lam * lam + (2 / 5) * lam == pytest.approx(1.0, abs=1e-14)


def test_phase_rhs_vanishes_on_gamma_pm():
    p = WaveParams(5, 2)
    for N in (0.2, 0.4, 0.995):
        for q in (q_minus, q_plus):
            V = q(N, p)
            assert abs(phase_rhs(N, V, p)) < 1e-9 * max(1.0, abs(V) ** -1)


def test_phase_rhs_formula_value():
    g, c, N, V = 5.0, 2.0, 0.5, -0.1
    direct = -(c * V + g * g * V * V * N ** (g - 1) + N * (1 - N ** g)) / (g * N ** g * V)
    assert phase_rhs(N, V, WaveParams(g, c)) == pytest.approx(direct, rel=1e-14)
    # worked by hand: numerator -(-0.2 + 0.015625 + 0.484375) = -0.3, denominator -0.015625
    assert direct == pytest.approx(19.2, rel=1e-12)


def test_phase_rhs_sign_between_curves():
    p = WaveParams(5, 2)
    for N in (0.1, 0.3, 0.5):
        lo, hi = q_minus(N, p), q_plus(N, p)
        assert phase_rhs(N, 0.5 * (lo + hi), p) < 0
    with pytest.raises(ParameterError):
        phase_rhs(0.5, 0.0, p)


def test_ode_residual_detects_non_solution():
    g = 5.0
    xi = np.linspace(-1, 1, 21)
    fake = SimpleNamespace(xi=xi, N=np.full_like(xi, 0.5), dN=np.zeros_like(xi),
                           params=WaveParams(g, 2))
    expect = 0.5 * (1 - 0.5 ** g)
    assert ode_residual(fake) == pytest.approx(expect / (1 + expect), rel=1e-12)


def test_ode_residual_reaction_only_free_zone():
    # at large gamma N^gamma is negligible on the free side, so -cN' = N there
    c = 2.0
    xi = np.linspace(0.5, 5, 2001)
    N = 0.5 * np.exp(-xi / c)
    obj = SimpleNamespace(xi=xi, N=N, dN=-N / c, params=WaveParams(80, c))
    assert ode_residual(obj) < 1e-12


def test_ode_residual_of_solution():
    p = WaveParams(10, 2, tol_ode=1e-12)
    t = solve_profile(p, GridSpec.adaptive(-15, 15, 1e-3))
    assert ode_residual(t) <= 1e-6


def test_uniform_grid_policy():
    t = solve_profile(WaveParams(5, 2), GridSpec.uniform(-5, 5, 101))
    assert len(t) == 101 and t.xi[0] == -5 and t.xi[-1] == 5


def test_rejects_subcritical_speed():
    with pytest.raises(ParameterError):
        WaveParams(5, 0.9)          # critical speed is sqrt(5/6) = 0.9129
    with pytest.raises(ParameterError):
        solve_profile((5, 2))
