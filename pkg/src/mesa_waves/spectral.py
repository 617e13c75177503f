"""Weighted Rayleigh quotient of the linearized operator and its minimum.

For v vanishing at both ends of the domain

    R(v) = [ 2 int (v')^2 a w  +  delta int v^2 e^{sqrt(gamma) xi} ] / int v^2 w.

The minimum over P1 finite elements is the smallest eigenvalue of the pencil
(A, B) of the two quadratic forms.  Both are assembled element by element
from the weight table's own (fine) grid, so the coefficients are integrated
accurately even where they vary on scales far below an element.

The damping coefficient is tied to the normalization of w0: rescaling the
weight table by f (see `scaled`) multiplies it by f as well, which leaves
every quotient unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.integrate import simpson
from scipy.sparse.linalg import eigsh

from .core import DomainError, NumericalError, RangeError, SampledFunction
from .weights import WeightTable

__all__ = ["GapEstimate", "PoincareReport", "rayleigh_quotient", "estimate_gap", "poincare_check",
           "rho_convexity_profile", "negative_part_constant", "parts_identity_check", "scaled",
           "bump", "bump_family", "gap_domain", "fit_eta"]

DEFAULT_LOG_W_CAP = 40.0
_AGREE = 0.05


def scaled(weight: WeightTable, f: float) -> WeightTable:
    """The same weight multiplied by f (K scales with it; the damping follows)."""
    extras = dict(weight.extras)
    extras.setdefault("K_ref", weight.K)
    return replace(weight, w0=weight.w0 * f, w=weight.w * f, log_w0=weight.log_w0 + math.log(f),
                   K=weight.K * f, extras=extras)


def _damping(weight: WeightTable) -> float:
    return weight.delta_gamma * weight.K / weight.extras.get("K_ref", weight.K)


def _sample(v, xi):
    """v and v' at xi, zero outside v's sampled range."""
    if isinstance(v, SampledFunction):
        inside = (xi >= v.xi[0]) & (xi <= v.xi[-1])
        vals = np.zeros_like(xi)
        der = np.zeros_like(xi)
        if np.any(inside):
            spl = v.spline
            vals[inside] = spl(xi[inside])
            der[inside] = spl.derivative()(xi[inside])
        return vals, der
    vals, der = v(xi)
    return np.asarray(vals, float), np.asarray(der, float)


def _forms(v, weight: WeightTable):
    xi = weight.xi
    vals, der = _sample(v, xi)
    g = weight.params.gamma
    # common scale for the weight so nothing overflows
    lw = weight.log_w
    support = (vals != 0) | (der != 0)
    if not np.any(support):
        raise DomainError("test function vanishes on the weight grid")
    if support[0] or support[-1]:
        raise DomainError("test function must vanish at both ends of the weight grid")
    shift = float(np.max(lw[support]))
    w = np.exp(np.where(support, lw - shift, -np.inf))
    damp = _damping(weight) * np.exp(np.where(support, math.sqrt(g) * xi - shift, -np.inf))
    d1 = np.trapezoid(der * der * weight.a * w, xi)
    d2 = np.trapezoid(vals * vals * damp, xi)
    den = np.trapezoid(vals * vals * w, xi)
    return d1, d2, den


def rayleigh_quotient(v, weight: WeightTable) -> float:
    """v is a SampledFunction (taken as zero outside its range) or a callable
    returning (v, v') at an array of abscissas."""
    d1, d2, den = _forms(v, weight)
    if not den > 0:
        raise DomainError("zero denominator in the Rayleigh quotient")
    return float((2.0 * d1 + d2) / den)


def bump(center: float, width: float, n: int = 2001) -> SampledFunction:
    """Gaussian exp(-((xi - center)/width)^2 / 2), cut at six widths."""
    x = np.linspace(center - 6 * width, center + 6 * width, n)
    return SampledFunction(x, np.exp(-0.5 * ((x - center) / width) ** 2))


def _compact(center, half_width):
    # (1 - z^2)^3 on |z| < 1: twice continuously differentiable, exactly zero outside
    def f(x):
        z = (x - center) / half_width
        inside = np.abs(z) < 1.0
        u = np.where(inside, 1.0 - z * z, 0.0)
        return u ** 3, -6.0 * z * u * u / half_width
    return f


def bump_family(lo: float, hi: float, count: int = 20, half_width: Optional[float] = None):
    """`count` smooth compactly supported bumps (1 - z^2)^3, as callables
    returning (v, v'), with supports evenly spread inside (lo, hi)."""
    half_width = half_width or (hi - lo) / (count + 1)
    centers = np.linspace(lo + half_width, hi - half_width, count + 2)[1:-1]
    return [_compact(float(c), half_width) for c in centers]


def gap_domain(weight: WeightTable, log_w_cap: float = DEFAULT_LOG_W_CAP, left_margin: float = 10.0):
    """(xi_min, xi_max) = (xi- - left_margin, min(xi* + 8, first xi where
    ln w exceeds ln w(xi-) + log_w_cap)).  Beyond that cap the weight grows
    double-exponentially and any admissible eigenfunction is negligible."""
    lm = weight.landmarks
    xi = weight.xi
    lo = max(lm.xi_minus - left_margin, float(xi[0]))
    lw = weight.log_w
    ref = float(np.interp(lm.xi_minus, xi, lw))
    over = np.nonzero((lw > ref + log_w_cap) & (xi > lm.xi_minus))[0]
    hi = min(lm.xi_star + 8.0, float(xi[over[0]]) if over.size else float(xi[-1]))
    return lo, hi


def _mesh(xi_fine, lo, hi, n_dof, arc=None):
    """Element edges picked among the fine nodes in [lo, hi], equispaced in
    the sum of three normalized clocks: fine-grid index, xi, and the
    cumulative |change| of `arc` (ln(a w) by default in _solve), which is
    what puts elements inside the density jump."""
    idx = np.nonzero((xi_fine >= lo) & (xi_fine <= hi))[0]
    if idx.size < n_dof + 2:
        raise RangeError(f"the weight grid has only {idx.size} nodes in the domain")
    x = xi_fine[idx]
    s = np.arange(idx.size, dtype=float)
    s = s / s[-1] + (x - x[0]) / (x[-1] - x[0])
    if arc is not None:
        var = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(np.asarray(arc, float)[idx])))])
        if var[-1] > 0:
            s = s + var / var[-1]
    targets = np.linspace(s[0], s[-1], n_dof + 2)
    pick = np.unique(np.searchsorted(s, targets).clip(0, idx.size - 1))
    return idx[pick]


def _assemble(weight: WeightTable, edges):
    """Tridiagonal stiffness (with the damping mass) and mass matrices on the
    P1 space of the elements between consecutive fine indices in `edges`."""
    xi = weight.xi
    g = weight.params.gamma
    first, last = int(edges[0]), int(edges[-1])
    x = xi[first:last + 1]
    lw = weight.log_w[first:last + 1]
    shift = float(np.max(lw))
    w = np.exp(lw - shift)
    aw = weight.a[first:last + 1] * w
    dmp = _damping(weight) * np.exp(math.sqrt(g) * x - shift)
    loc = np.asarray(edges) - first
    elem = np.searchsorted(loc, np.arange(x.size), side="right") - 1
    elem = elem.clip(0, loc.size - 2)
    xl = x[loc[elem]]
    h_e = np.diff(x[loc])
    seg = np.diff(x)
    seg_elem = elem[:-1]                       # fine segment k lies in element elem[k]

    ne = h_e.size
    tl = (x[:-1] - xl[:-1]) / h_e[seg_elem]
    tr = (x[1:] - xl[:-1]) / h_e[seg_elem]

    def seg_int(vals_l, vals_r):
        return np.bincount(seg_elem, weights=0.5 * seg * (vals_l + vals_r), minlength=ne)

    stiff = seg_int(aw[:-1], aw[1:]) / h_e ** 2
    m00 = seg_int(w[:-1] * (1 - tl) ** 2, w[1:] * (1 - tr) ** 2)
    m01 = seg_int(w[:-1] * tl * (1 - tl), w[1:] * tr * (1 - tr))
    m11 = seg_int(w[:-1] * tl ** 2, w[1:] * tr ** 2)
    d00 = seg_int(dmp[:-1] * (1 - tl) ** 2, dmp[1:] * (1 - tr) ** 2)
    d01 = seg_int(dmp[:-1] * tl * (1 - tl), dmp[1:] * tr * (1 - tr))
    d11 = seg_int(dmp[:-1] * tl ** 2, dmp[1:] * tr ** 2)
    # global tridiagonal forms over all element nodes, then drop both ends
    n = ne + 1
    A_d = np.zeros(n)
    A_o = np.zeros(ne)
    B_d = np.zeros(n)
    B_o = np.zeros(ne)
    k2 = 2.0 * stiff
    A_d[:-1] += k2 + d00
    A_d[1:] += k2 + d11
    A_o += -k2 + d01
    B_d[:-1] += m00
    B_d[1:] += m11
    B_o += m01
    A_d, A_o, B_d, B_o = A_d[1:-1], A_o[1:-1], B_d[1:-1], B_o[1:-1]
    return A_d, A_o, B_d, B_o, x[loc]


def _smallest(A_d, A_o, B_d, B_o):
    # symmetric diagonal scaling by the mass diagonal keeps both pencils O(1)
    s = 1.0 / np.sqrt(B_d)
    A = sp.diags([A_o * s[:-1] * s[1:], A_d * s * s, A_o * s[:-1] * s[1:]], [-1, 0, 1], format="csc")
    B = sp.diags([B_o * s[:-1] * s[1:], B_d * s * s, B_o * s[:-1] * s[1:]], [-1, 0, 1], format="csc")
    vals, vecs = eigsh(A, k=1, M=B, sigma=0.0, which="LM", tol=1e-12, maxiter=5000)
    lam = float(vals[0])
    y = vecs[:, 0]

    # normwise backward error; inside the density jump the scaled stiffness
    # entries reach ~1/h^2 ~ 1e24, so ||A y|| alone is no useful yardstick
    nA = float(abs(A).sum(axis=1).max())
    nB = float(abs(B).sum(axis=1).max())
    ny = float(np.linalg.norm(y))
    resid = float(np.linalg.norm(A @ y - lam * (B @ y)) / ((nA + abs(lam) * nB) * ny))
    return lam, y * s, resid


@dataclass(frozen=True)
class GapEstimate:
    gamma: float
    speed: float
    gap: float
    n_dof: int
    domain: tuple
    test_family_margins: tuple = ()
    extras: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> str:
        d = {"gamma": self.gamma, "speed": self.speed, "gap": self.gap, "n_dof": self.n_dof,
             "domain": list(self.domain), "test_family_margins": list(self.test_family_margins)}
        d.update(self.extras)
        return json.dumps(d, sort_keys=True, default=float)


def _solve(weight, lo, hi, n_dof):
    edges = _mesh(weight.xi, lo, hi, n_dof, arc=np.log(weight.a) + weight.log_w)
    A_d, A_o, B_d, B_o, nodes = _assemble(weight, edges)
    lam, vec, resid = _smallest(A_d, A_o, B_d, B_o)
    return lam, vec, resid, nodes


def estimate_gap(weight: WeightTable, n_dof: int = 200, max_doublings: int = 6,
                 log_w_cap: float = DEFAULT_LOG_W_CAP, family: Optional[Sequence] = None,
                 check_truncation: bool = True) -> GapEstimate:
    """Smallest generalized eigenvalue of the P1 forms, doubling the number of
    unknowns until two successive values agree within 5%."""
    if n_dof < 50:
        raise DomainError("n_dof must be at least 50")
    lo, hi = gap_domain(weight, log_w_cap)
    history = []
    n = int(n_dof)
    lam, vec, resid, nodes = _solve(weight, lo, hi, n)
    history.append((n, lam))
    for _ in range(max_doublings):
        n2 = 2 * n
        lam2, vec2, resid2, nodes2 = _solve(weight, lo, hi, n2)
        history.append((n2, lam2))
        done = abs(lam2 - lam) <= _AGREE * abs(lam2)
        n, lam, vec, resid, nodes = n2, lam2, vec2, resid2, nodes2
        if done:
            break
    else:
        raise NumericalError("gap estimate did not settle under refinement",
                             {"history": history, "residual": resid})
    if resid > 1e-6:
        raise NumericalError("eigen-solver residual too large", {"residual": resid})
    extras = {"history": history, "eig_residual": resid}
    if check_truncation:
        lo2, hi2 = gap_domain(weight, 2.0 * log_w_cap, left_margin=12.0)
        lam_t = _solve(weight, lo2, hi2, n)[0]
        extras["truncation_change"] = abs(lam_t - lam) / abs(lam)
        extras["domain_wide"] = [lo2, hi2]
    margins = ()
    if family is None:
        family = bump_family(lo, hi)
    if family:
        margins = tuple(rayleigh_quotient(v, weight) - lam for v in family)
    return GapEstimate(gamma=float(weight.params.gamma), speed=float(weight.params.speed), gap=lam,
                       n_dof=n, domain=(lo, hi), test_family_margins=margins, extras=extras)


def fit_eta(gammas, gaps):
    """Least-squares line ln(gap) = k gamma + m; returns (slope, eta = e^slope)."""
    k = float(np.polyfit(np.asarray(gammas, float), np.log(np.asarray(gaps, float)), 1)[0])
    return k, math.exp(k)


@dataclass(frozen=True)
class PoincareReport:
    lhs: tuple
    dissipation: tuple
    damping: tuple
    candidates: tuple
    required_C_gamma: tuple
    C_bar: float
    C_gamma: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, default=float)


def poincare_check(v, weight: WeightTable, landmarks=None, candidates=None) -> PoincareReport:
    """LHS = int_{<xi-} v^2 gamma N^gamma w0 + int_{>xi~} v^2 w0 / (gamma N^gamma)
    against C_bar int (v')^2 a w0 + C_gamma int v^2 e^{sqrt(gamma) xi}.

    `v` may be one test function or a list.  For every candidate C_bar the
    smallest C_gamma covering all of them is recorded; the reported pair is
    the one with the smallest max(C_bar, C_gamma)."""
    lm = landmarks or weight.landmarks
    vs = v if isinstance(v, (list, tuple)) else [v]
    xi = weight.xi
    g = weight.params.gamma
    if candidates is None:
        candidates = np.logspace(-4, 8, 241)
    lhs, d1s, d2s = [], [], []
    for f in vs:
        vals, der = _sample(f, xi)
        supp = (vals != 0) | (der != 0)
        shift = float(np.max(weight.log_w0[supp])) if np.any(supp) else 0.0
        w0 = np.exp(np.where(supp, weight.log_w0 - shift, -np.inf))
        left = xi <= lm.xi_minus
        right = xi >= lm.xi_tilde
        v2 = vals * vals
        L = (np.trapezoid(np.where(left, v2 * weight.a * w0, 0.0), xi)
             + np.trapezoid(np.where(right, v2 * w0 / weight.a, 0.0), xi))
        d1 = np.trapezoid(der * der * weight.a * w0, xi)
        d2 = np.trapezoid(v2 * np.exp(np.where(supp, math.sqrt(g) * xi - shift, -np.inf)), xi)
        lhs.append(float(L))
        d1s.append(float(d1))
        d2s.append(float(d2))
    lhs_a, d1_a, d2_a = map(np.asarray, (lhs, d1s, d2s))
    req = []
    for cb in candidates:
        need = np.where(lhs_a > cb * d1_a, (lhs_a - cb * d1_a) / np.where(d2_a > 0, d2_a, np.inf), 0.0)
        req.append(float(np.max(need)))
    req = np.asarray(req)
    k = int(np.argmin(np.maximum(candidates, req)))
    return PoincareReport(lhs=tuple(lhs), dissipation=tuple(d1s), damping=tuple(d2s),
                          candidates=tuple(float(c) for c in candidates), required_C_gamma=tuple(req),
                          C_bar=float(candidates[k]), C_gamma=float(req[k]))


def _rho_bracket(ev, params):
    """rho''/rho times gamma N^gamma, with rho = (a w0)^(1/2)."""
    g, c = params.gamma, params.speed
    P = np.asarray(ev["P"], float)
    slope = np.exp(np.asarray(ev["rho"], float))        # -N'/N
    return (g + 1.0) * P + c * c / (4.0 * g * P) - 0.5 * c * g * slope - 1.0


def rho_convexity_profile(weight: WeightTable, landmarks=None) -> SampledFunction:
    """rho rho'' on the weight grid from the closed form
        rho rho'' = w0 [ (gamma+1) N^gamma + c^2/(4 gamma N^gamma) + c gamma N'/(2N) - 1 ],
    no differencing involved.  Deep in the free zone the value exceeds the
    double range and is stored as +inf (the bracket is positive there)."""
    ev = weight.evaluate(weight.xi)["ev"] if weight.profile is not None else None
    if ev is None:
        raise DomainError("weight table carries no profile")
    with np.errstate(over="ignore"):
        return SampledFunction(weight.xi, weight.w0 * _rho_bracket(ev, weight.params))


def negative_part_constant(weight: WeightTable, landmarks=None) -> float:
    """Smallest C with rho (rho'')_- <= C e^{sqrt(gamma) xi} on (xi-, xi~)."""
    lm = landmarks or weight.landmarks
    rr = rho_convexity_profile(weight, lm).values
    m = (weight.xi > lm.xi_minus) & (weight.xi < lm.xi_tilde)
    neg = np.maximum(-rr[m], 0.0)
    # rho rho'' = rho^2 rho''/rho, and rho^2 = a w0
    return float(np.max(neg * np.exp(-math.sqrt(weight.params.gamma) * weight.xi[m]))) if m.any() else 0.0


def parts_identity_check(v: SampledFunction, weight: WeightTable) -> float:
    """|int ((v rho)')^2 - int rho^2 (v')^2 + int v^2 rho rho''| / int rho^2 (v')^2.

    v is sampled on a uniform grid inside the weight's range; (v rho)' and v'
    come from cubic splines of the samples, rho rho'' from its closed form."""
    x = np.asarray(v.xi, float)
    vals = np.asarray(v.values, float)
    if x[0] < weight.xi[0] or x[-1] > weight.xi[-1]:
        raise DomainError("test function extends beyond the weight table")
    out = weight.evaluate(x)
    ev = out["ev"]
    logrho2 = np.log(out["a"]) + out["log_w0"]
    shift = float(np.max(logrho2))
    rho2 = np.exp(logrho2 - shift)
    rho = np.sqrt(rho2)
    rhorho2 = rho2 * _rho_bracket(ev, weight.params) / out["a"]
    d_vrho = CubicSpline(x, vals * rho).derivative()(x)
    dv = CubicSpline(x, vals).derivative()(x)
    I1 = simpson(d_vrho ** 2, x=x)
    I2 = simpson(rho2 * dv ** 2, x=x)
    I3 = simpson(vals ** 2 * rhorho2, x=x)
    return float(abs(I1 - I2 + I3) / I2)
