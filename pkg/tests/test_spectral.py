import math

import numpy as np
import pytest

from mesa_waves.core import DomainError, GridSpec, NumericalError, SampledFunction, WaveParams
from mesa_waves.spectral import (_compact, bump, bump_family, estimate_gap, fit_eta, gap_domain,
                                 negative_part_constant, parts_identity_check, poincare_check,
                                 rayleigh_quotient, rho_convexity_profile, scaled)
from mesa_waves.tw_profile import solve_profile
from mesa_waves.weights import build_weights


def hat(center, half):
    def f(x):
        z = (x - center) / half
        v = np.where(np.abs(z) < 1, 1 - np.abs(z), 0.0)
        d = np.where(np.abs(z) < 1, -np.sign(z) / half, 0.0)
        return v, d
    return f


def test_quotient_of_hat(weight):
    w = weight(10, 2)
    q = rayleigh_quotient(hat(w.landmarks.xi_minus, 0.2), w)
    assert 0 < q < np.inf


def test_quotient_homogeneous(weight):
    w = weight(10, 2)
    f = _compact(w.landmarks.xi_minus, 0.3)
    doubled = lambda x: tuple(2.0 * a for a in f(x))   # noqa: E731
    assert rayleigh_quotient(doubled, w) == pytest.approx(rayleigh_quotient(f, w), rel=1e-13)


def test_quotient_baseline_two_resolutions():
    vals = []
    for ds in (2e-3, 1e-3):
        w = build_weights(solve_profile(WaveParams(10, 2), GridSpec.adaptive(-15, 15, ds)))
        x0 = w.landmarks.xi_zero
        x = np.linspace(x0 - 0.4, x0 + 0.4, 2001)
        vals.append(rayleigh_quotient(SampledFunction(x, np.exp(-0.5 * ((x - x0) / 0.1) ** 2)), w))
    assert vals[0] > 0
    assert abs(vals[0] - vals[1]) <= 1e-4 * vals[1]
    assert vals[1] == pytest.approx(2.0426246, rel=1e-6)


def test_quotient_needs_vanishing_ends(weight):
    w = weight(10, 2)
    with pytest.raises(DomainError):
        rayleigh_quotient(bump(w.xi[0], 1.0), w)


def test_gap_positive_gamma5(weight):
    g = estimate_gap(weight(5, 2))
    assert g.gap > 0
    n, lam = g.extras["history"][-1]
    n0, lam0 = g.extras["history"][-2]
    assert n == 2 * n0 and abs(lam - lam0) < 0.05 * lam
    assert g.extras["truncation_change"] < 0.01
    assert g.extras["eig_residual"] < 1e-12


def test_gap_is_a_lower_envelope(weight):
    g = estimate_gap(weight(10, 2))
    assert len(g.test_family_margins) == 20
    assert min(g.test_family_margins) >= -1e-8 * g.gap


def test_gap_invariant_under_weight_scaling(weight):
    w = weight(5, 2)
    a = estimate_gap(w, family=(), check_truncation=False).gap
    b = estimate_gap(scaled(w, 2.0), family=(), check_truncation=False).gap
    assert b == pytest.approx(a, rel=1e-10)


def test_gap_dof_floor(weight):
    with pytest.raises(DomainError):
        estimate_gap(weight(5, 2), n_dof=10)


def test_gap_reports_non_settling(weight):
    with pytest.raises(NumericalError):
        estimate_gap(weight(20, 2), n_dof=50, max_doublings=0, family=())


def test_fit_eta():
    k, eta = fit_eta([1, 2, 3], [math.exp(-0.1), math.exp(-0.2), math.exp(-0.3)])
    assert k == pytest.approx(-0.1) and eta == pytest.approx(math.exp(-0.1))


def test_gap_json(weight):
    g = estimate_gap(weight(5, 2), family=(), check_truncation=False)
    assert '"gap"' in g.to_json()


def test_poincare_trivial_inside_window(weight):
    w = weight(10, 2)
    lm = w.landmarks
    mid, half = 0.5 * (lm.xi_minus + lm.xi_tilde), 0.45 * (lm.xi_tilde - lm.xi_minus)
    r = poincare_check(_compact(mid, half), w)
    assert r.lhs[0] == 0.0
    assert r.C_gamma == 0.0


def test_poincare_family_and_stability(weight):
    cbars = []
    for g in (10, 20):
        w = weight(g, 2)
        lo, hi = gap_domain(w)
        r = poincare_check(bump_family(lo, hi), w)
        assert all(L <= r.C_bar * d + r.C_gamma * e + 1e-12 * max(L, 1e-300)
                   for L, d, e in zip(r.lhs, r.dissipation, r.damping))
        cbars.append(r.C_bar)
    assert max(cbars) / min(cbars) <= 2.0


def test_poincare_translation_into_free_zone(weight):
    w = weight(10, 2)
    x0 = w.landmarks.xi_tilde + 0.1
    ratios = [(lambda r: r.lhs[0] / r.dissipation[0])(poincare_check(_compact(x0 + s, 0.1), w))
              for s in (0.0, 0.1, 0.2)]
    assert ratios[1] <= ratios[0] and ratios[2] <= ratios[1]


@pytest.mark.parametrize("gamma", [10, 20])
def test_rho_convexity_outside_window(weight, gamma):
    w = weight(gamma, 2)
    lm = w.landmarks
    rr = rho_convexity_profile(w).values
    m = (w.xi <= lm.xi_minus) | (w.xi >= lm.xi_tilde)
    assert np.min(rr[m]) >= -1e-10


def test_negative_part_constant(weight):
    Cs = [negative_part_constant(weight(g, 2)) for g in (10, 20)]
    assert all(0 < C < np.inf for C in Cs)
    # fitted geometric growth C_gamma ~ C^gamma with a finite base
    base = math.exp((math.log(Cs[1]) - math.log(Cs[0])) / 10)
    assert 1 < base < 10


@pytest.mark.parametrize("gamma", [10, 20])
def test_parts_identity_gaussian(weight, gamma):
    w = weight(gamma, 2)
    x0 = w.landmarks.xi_minus
    s = min(0.2, (w.xi[-1] - x0) / 7)
    x = np.arange(x0 - 6 * s, x0 + 6 * s + 1e-12, 1e-3)
    v = SampledFunction(x, np.exp(-0.5 * ((x - x0) / s) ** 2))
    assert parts_identity_check(v, w) <= 1e-6


def test_parts_identity_hat_first_order(weight):
    w = weight(10, 2)
    x0 = w.landmarks.xi_minus
    errs = []
    for h in (2e-3, 1e-3):
        x = np.arange(x0 - 0.3, x0 + 0.3 + 1e-12, h)
        errs.append(parts_identity_check(SampledFunction(x, np.maximum(0, 1 - np.abs(x - x0) / 0.3)), w))
    assert errs[1] < 0.1
    assert errs[1] <= errs[0] + 1e-9


def test_parts_identity_positivity(weight):
    w = weight(10, 2)
    x0 = w.landmarks.xi_tilde
    x = np.linspace(x0 - 0.15, x0 + 0.15, 601)
    vals = (1 - np.minimum(((x - x0) / 0.15) ** 2, 1)) ** 3
    out = w.evaluate(x)
    shift = float(np.max(out["log_w0"]))
    rho2 = out["a"] * np.exp(out["log_w0"] - shift)
    rr = rho_convexity_profile(w)
    dv = np.gradient(vals, x)
    lhs = np.trapezoid(rho2 * dv ** 2, x)
    rhs = np.trapezoid(vals ** 2 * np.interp(x, rr.xi, rr.values) * math.exp(-shift), x)
    assert lhs >= rhs


def test_parts_identity_rejects_outside(weight):
    w = weight(20, 2)
    x = np.linspace(w.xi[-1] - 0.1, w.xi[-1] + 0.1, 11)
    with pytest.raises(DomainError):
        parts_identity_check(SampledFunction(x, np.ones_like(x)), w)
