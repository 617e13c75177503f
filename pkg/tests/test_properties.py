"""Property-based checks of invariants that hold for any admissible input."""

import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from mesa_waves.core import SampledFunction, WaveParams, critical_speed, cumulative_integral, integrate
from mesa_waves.evolution import _series_G, logistic_pressure
from mesa_waves.hele_shaw import HsProfile, hs_density, hs_flux, hs_pressure, hs_pressure_slope
from mesa_waves.landmarks import discriminant_roots, q_minus, q_plus
from mesa_waves.spectral import _compact, rayleigh_quotient

finite = st.floats(-10, 10, allow_nan=False)


@st.composite
def grids(draw, n_min=3, n_max=30):
    n = draw(st.integers(n_min, n_max))
    steps = draw(st.lists(st.floats(0.01, 1.0), min_size=n - 1, max_size=n - 1))
    x0 = draw(st.floats(-5, 5))
    return x0 + np.concatenate([[0.0], np.cumsum(steps)])


@given(grids(), st.data())
def test_interpolant_preserves_monotone_data(x, data):
    incs = data.draw(st.lists(st.floats(0, 2), min_size=x.size - 1, max_size=x.size - 1))
    y = np.concatenate([[0.0], np.cumsum(incs)])
    f = SampledFunction(x, y)
    q = np.linspace(x[0], x[-1], 200)
    v = f(q)
    assert np.all(np.diff(v) >= -1e-9 * (1 + np.max(np.abs(y))))
    assert np.all(v >= y[0] - 1e-9) and np.all(v <= y[-1] + 1e-9)
    assert np.array_equal(f(x), y)


@given(grids(), st.data(), finite, finite)
def test_integral_is_linear(x, data, alpha, beta):
    y1 = np.array(data.draw(st.lists(finite, min_size=x.size, max_size=x.size)))
    y2 = np.array(data.draw(st.lists(finite, min_size=x.size, max_size=x.size)))
    a, b = x[0], x[-1]
    lhs = integrate(SampledFunction(x, alpha * y1 + beta * y2), a, b, method="trapezoid")
    rhs = alpha * integrate(SampledFunction(x, y1), a, b, method="trapezoid") \
        + beta * integrate(SampledFunction(x, y2), a, b, method="trapezoid")
    assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-9 * (1 + abs(alpha) + abs(beta)) * 200)


@given(grids(), st.floats(-3, 3), st.floats(-3, 3))
def test_integrals_exact_on_lines(x, m, k):
    y = m * x + k
    exact = 0.5 * m * (x[-1] ** 2 - x[0] ** 2) + k * (x[-1] - x[0])
    assert math.isclose(cumulative_integral(x, y)[-1], exact, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(integrate(SampledFunction(x, y), x[0], x[-1], method="trapezoid"), exact,
                        rel_tol=1e-9, abs_tol=1e-9)


@given(grids(n_min=4))
def test_reversed_bounds_negate(x):
    f = SampledFunction(x, np.sin(x))
    a, b = x[0], x[-1]
    assert integrate(f, b, a) == -integrate(f, a, b)


@given(st.floats(1.01, 20), st.floats(-8, 8))
def test_limit_wave_relations(c, xi):
    p = HsProfile(c)
    P, dP, N, J = hs_pressure(p, xi), hs_pressure_slope(p, xi), hs_density(p, xi), hs_flux(p, xi)
    assert 0 <= P < 1 and 0 < N <= 1
    assert (1 - N) * P == 0
    # flux is c N + N P'
    assert math.isclose(J, c * N + N * dP, rel_tol=1e-12, abs_tol=1e-14)


@given(st.floats(1.5, 60), st.floats(0, 0.999), st.floats(0.0, 3.0))
def test_branches_ordered(gamma, frac, excess):
    c = critical_speed(gamma) * (1 + 1e-3) + excess
    p = WaveParams(gamma, c)
    if c * c / (4 * gamma * gamma) <= 0.25:
        N1, N2 = discriminant_roots(p)
        assert 0 < N1 <= N2 < 1
        N = frac * N1 if frac > 0 else 0.5 * N1
    else:
        N = max(frac, 1e-3)
    assume(N > 1e-3)
    assert q_plus(N, p) >= q_minus(N, p)
    assert q_plus(N, p) <= 0


@given(st.floats(1.5, 60), st.floats(0.0, 1.0), st.floats(0, 5))
def test_logistic_stays_in_unit_interval(gamma, P0, t):
    P = logistic_pressure(P0, gamma, t)
    assert 0 <= P <= 1 + 1e-15
    assert P >= P0 - 1e-15


@given(st.floats(1.5, 60), st.floats(-0.6, 0.6))
def test_remainder_series_matches_convexity(gamma, x):
    x = min(max(x, -1 / gamma), 1 / gamma)
    G = float(_series_G(np.array([x]), gamma)[0])
    direct = (1 + x) ** (gamma + 1) - 1 - (gamma + 1) * x
    assert G >= 0
    assert math.isclose(G, direct, rel_tol=1e-6, abs_tol=1e-12)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.floats(-0.5, 0.5), st.floats(0.05, 0.4), st.floats(1e-3, 1e3))
def test_quotient_scale_invariant(weight, dx, half, k):
    w = weight(10, 2)
    f = _compact(w.landmarks.xi_minus + dx, half)
    g = lambda x: tuple(k * v for v in f(x))  # noqa: E731
    q1, q2 = rayleigh_quotient(f, w), rayleigh_quotient(g, w)
    assert q1 > 0
    assert math.isclose(q1, q2, rel_tol=1e-10)
