"""Stability weight of the linearized operator and its modulation.

The linearization of the profile equation around N, written for
u = (n - N)/N', reads  u_t + b u' - a u'' = 0  with

    a = gamma N^gamma,    b = 2c + 2N(1 - N^gamma)/N'

(the second form of b follows from substituting N'' from the profile
equation).  The reference weight solves (a w0)' + (b - c) w0 = 0:

    w0 = K N^gamma (N')^2 exp( int_{xi-}^{xi} c / (gamma N^gamma) ),

normalized by w0(xi-) = 1.  In the free zone w0 grows double-exponentially,
so everything is carried as ln w0 and the table stops where ln w0 would leave
double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ConfigError, DomainError, RangeError, SampledFunction, SolverError
from .landmarks import Landmarks, locate_landmarks
from .tw_profile import Profile, ProfileTable

__all__ = ["WeightTable", "build_w0", "build_phi", "build_weights", "linearized_coefficients",
           "b_from_flux", "weight_ode_residual", "congested_decay_slope",
           "double_exponential_slope", "comparison_constant", "LOG_W_MAX"]

LOG_W_MAX = 700.0          # largest ln w0 kept in a WeightTable
_DELTA0_RANGE = (1e-6, 1.0)
_BISECTIONS = 40
_MAX_LOG_STEP = 0.5         # largest change of ln w0 between neighbouring nodes
_REFINE_PASSES = 8
_MAX_INSERT = 400


def _profile_of(table) -> Profile:
    prof = getattr(table, "profile", None)
    return prof if prof is not None else Profile(table.params)


def _log_terms(ev, gamma):
    """ln N, ln(-N'), ln I, with I the running integral of c/(gamma N^gamma)."""
    r = np.asarray(ev["r"], float)
    return r, np.asarray(ev["rho"], float) + r, np.asarray(ev["logI"], float)


def _log_w0(ev, ref, gamma):
    r, ldn, lI = _log_terms(ev, gamma)
    r0, ldn0, lI0 = ref
    # I - I(xi-) without forming I itself (it overflows in the free zone)
    d = lI - lI0
    with np.errstate(over="ignore"):
        dI = np.where(d >= 0, np.exp(lI0) * np.expm1(np.minimum(d, 709.0)),
                      -np.exp(lI) * np.expm1(np.minimum(-d, 709.0)))
    dI = np.where(d > 709.0, np.inf, dI)
    return gamma * (r - r0) + 2.0 * (ldn - ldn0) + dI


@dataclass(frozen=True, eq=False)
class WeightTable:
    params: object
    xi: np.ndarray
    w0: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    a: np.ndarray
    b: np.ndarray
    K: float
    delta_gamma: float
    log_w0: Optional[np.ndarray] = None
    landmarks: Optional[Landmarks] = field(default=None, repr=False)
    profile: Optional[Profile] = field(default=None, repr=False)
    extras: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("xi", "w0", "phi", "w", "a", "b"):
            arr = np.array(getattr(self, name), float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        lw = self.log_w0
        if lw is None:
            with np.errstate(divide="ignore"):
                lw = np.log(self.w0)
        lw = np.array(lw, float)
        lw.flags.writeable = False
        object.__setattr__(self, "log_w0", lw)

    def __len__(self):
        return self.xi.size

    @property
    def log_w(self):
        return self.log_w0 + np.log(self.phi)

    def evaluate(self, xi):
        """ln w0, a and b at arbitrary abscissas, straight from the profile."""
        if self.profile is None or self.landmarks is None:
            raise DomainError("this weight table carries no profile")
        g = self.params.gamma
        ev = self.profile.evaluate(xi)
        ref = _log_terms(self.profile.evaluate([self.landmarks.xi_minus]), g)
        a, b = _coefficients(ev, self.params)
        return {"log_w0": _log_w0(ev, ref, g), "a": a, "b": b, "ev": ev}

    def to_rows(self):
        return np.column_stack([self.xi, self.w0, self.phi, self.w, self.a, self.b])

    def sidecar(self) -> dict:
        d = {"K": self.K, "delta_gamma": self.delta_gamma, "gamma": self.params.gamma,
             "speed": self.params.speed}
        d.update({k: v for k, v in self.extras.items() if np.isscalar(v)})
        return d


def _coefficients(ev, params):
    g, c = params.gamma, params.speed
    P = np.asarray(ev["P"], float)
    # N'/N = -exp(rho); 2N(1-P)/N' = -2(1-P) exp(-rho)
    with np.errstate(over="ignore"):
        b = 2.0 * c - 2.0 * np.asarray(ev["one_minus_P"], float) * np.exp(-np.asarray(ev["rho"], float))
    return g * P, b


def linearized_coefficients(table: ProfileTable):
    """(a, b) on the table grid; N'' is taken from the profile equation."""
    ev = _table_fields(table)
    a, b = _coefficients(ev, table.params)
    return SampledFunction(table.xi, a), SampledFunction(table.xi, b)


def b_from_flux(table: ProfileTable):
    """b = -2 gamma (N^gamma N')' / N', with N'' substituted from the profile
    equation.  Algebraically equal to linearized_coefficients' b."""
    g, c = table.params.gamma, table.params.speed
    N, dN, P = np.asarray(table.N), np.asarray(table.dN), np.asarray(table.P)
    d2N = (-c * dN - g * g * dN * dN * P / N - N * (1.0 - P)) / (g * P)
    flux_slope = g * P / N * dN * dN + P * d2N
    return SampledFunction(table.xi, -2.0 * g * flux_slope / dN)


def _table_fields(table):
    ex = getattr(table, "extras", {}) or {}
    if all(k in ex for k in ("rho", "logI", "one_minus_P")):
        return {"r": table.log_N, "rho": ex["rho"], "logI": ex["logI"], "P": table.P,
                "one_minus_P": ex["one_minus_P"]}
    return _profile_of(table).evaluate(table.xi)


def _weight_grid(table: ProfileTable, landmarks: Landmarks, max_step: float = _MAX_LOG_STEP):
    """Table grid plus nodes inserted wherever ln w0 moves by more than
    `max_step` between neighbours (inside the density jump the table grid is
    far too coarse for the weight).  Returns (xi, ln w0, fields, ln K)."""
    g = table.params.gamma
    prof = _profile_of(table)
    ref = _log_terms(prof.evaluate([landmarks.xi_minus]), g)
    if not np.all(np.isfinite(ref[1])):
        raise SolverError("N' vanishes at xi-", {"xi_minus": landmarks.xi_minus})
    log_K = float(-(g * ref[0][0] + 2.0 * ref[1][0]))
    xi = np.asarray(table.xi, float)
    fields = {k: np.asarray(v, float) for k, v in _table_fields(table).items()}
    lw = _log_w0(fields, ref, g)
    for _ in range(_REFINE_PASSES):
        bad = np.nonzero(~(lw <= LOG_W_MAX))[0]
        stop = bad[0] if bad.size else xi.size - 1
        jump = np.abs(np.diff(lw[:stop + 1]))
        jump = np.where(np.isfinite(jump), jump, np.inf)
        cells = np.nonzero(jump > max_step)[0]
        if cells.size == 0:
            break
        extra = []
        for k in cells:
            m = int(min(math.ceil(min(jump[k], 1e4) / max_step), _MAX_INSERT))
            extra.append(np.linspace(xi[k], xi[k + 1], m + 1)[1:-1])
        new = np.setdiff1d(np.concatenate(extra), xi)
        if new.size == 0:
            break
        ev = prof.evaluate(new)
        xi_all = np.concatenate([xi, new])
        order = np.argsort(xi_all, kind="stable")
        xi = xi_all[order]
        lw = np.concatenate([lw, _log_w0(ev, ref, g)])[order]
        fields = {k: np.concatenate([fields[k], np.asarray(ev[k], float)])[order] for k in fields}
    return xi, lw, fields, log_K


def build_w0(table: ProfileTable, landmarks: Landmarks):
    """Reference weight, truncated where ln w0 > LOG_W_MAX, on the table grid
    refined where ln w0 varies fast.

    Returns (w0, K) with w0 a SampledFunction; ln K = -ln(N^gamma N'^2) at xi-."""
    xi, lw, _, log_K = _weight_grid(table, landmarks)
    keep = _window(xi, lw)
    return SampledFunction(xi[keep], np.exp(lw[keep])), math.exp(log_K)


def _window(xi, lw):
    bad = np.nonzero(~(lw <= LOG_W_MAX))[0]
    stop = bad[0] if bad.size else xi.size
    if stop < 3:
        raise RangeError("weight overflows at the start of the grid")
    keep = np.zeros(xi.size, bool)
    keep[:stop] = True
    return keep


def _phi_density(ev, lw, params):
    """ln( e^{sqrt(gamma) xi} / (a w0) ) at the sample points."""
    g = params.gamma
    a = g * np.asarray(ev["P"], float)
    return math.sqrt(g) * np.asarray(ev["xi"], float) - np.log(a) - lw


def build_phi(weight: WeightTable, params=None, step: float = 1e-3):
    """Modulation phi solving phi' = -(delta/sqrt(gamma)) e^{sqrt(gamma) xi}/(a w0)
    with phi = 2 at xi_min = min(xi- - 10, -20).  delta = delta0 / sqrt(gamma),
    delta0 the largest value on a bisection over [1e-6, 1] keeping the total
    variation (plus the analytic tail left of xi_min) at most 1.

    Returns (phi, delta_gamma, info)."""
    params = params or weight.params
    g, c = params.gamma, params.speed
    prof, lm = weight.profile, weight.landmarks
    kappa = math.sqrt(g) - 2.0 * math.sqrt(1.0 + c * c / (4.0 * g * g))
    if kappa <= 0:
        raise ConfigError(f"e^(sqrt(gamma) xi)/(a w0) is not integrable at -inf for gamma = {g}")
    xi_min = min(lm.xi_minus - 10.0, -20.0)
    xi = weight.xi
    ref = _log_terms(prof.evaluate([lm.xi_minus]), g)
    # mass between xi_min and the table start, on an auxiliary uniform grid
    lead_mass = 0.0
    if xi_min < xi[0]:
        n = max(int(math.ceil((xi[0] - xi_min) / step)), 2) + 1
        xs = np.linspace(xi_min, xi[0], n)
        ev = prof.evaluate(xs)
        dens = np.exp(_phi_density(ev, _log_w0(ev, ref, g), params))
        lead_mass = float(np.trapezoid(dens, xs))
        tail = float(dens[0]) / kappa
    else:
        ev = prof.evaluate([xi_min])
        tail = float(np.exp(_phi_density(ev, _log_w0(ev, ref, g), params))[0]) / kappa
    ev = {"xi": xi, "P": weight.a / g}
    dens = np.exp(_phi_density(ev, weight.log_w0, params))
    dens = np.where(xi < xi_min, 0.0, dens)
    xs = np.maximum(xi, xi_min)
    run = lead_mass + np.concatenate([[0.0], np.cumsum(0.5 * np.diff(xs) * (dens[:-1] + dens[1:]))])
    total = float(run[-1]) + tail
    scale = 1.0 / g          # phi' = -(delta0 / gamma) * dens
    lo, hi = _DELTA0_RANGE
    if lo * scale * total > 1.0:
        raise ConfigError("total variation of phi exceeds 1 for every delta0; extend the grid")
    if hi * scale * total <= 1.0:
        delta0 = hi
    else:
        for _ in range(_BISECTIONS):
            mid = 0.5 * (lo + hi)
            if mid * scale * total <= 1.0:
                lo = mid
            else:
                hi = mid
        delta0 = lo
    phi = 2.0 - delta0 * scale * run
    info = {"delta0": delta0, "xi_min_phi": xi_min, "tail_mass": delta0 * scale * tail,
            "total_variation": delta0 * scale * total, "kappa": kappa}
    return SampledFunction(xi, phi), delta0 / math.sqrt(g), info


def build_weights(table: ProfileTable, landmarks: Optional[Landmarks] = None) -> WeightTable:
    """w0, phi, w = w0 phi and the coefficients a, b on the table grid."""
    if landmarks is None:
        landmarks = locate_landmarks(table)
    xi, lw, fields, log_K = _weight_grid(table, landmarks)
    keep = _window(xi, lw)
    xi, lw = xi[keep], lw[keep]
    fields = {k: v[keep] for k, v in fields.items()}
    K = math.exp(log_K)
    w0 = SampledFunction(xi, np.exp(lw))
    n = len(w0)
    a, b = _coefficients(fields, table.params)
    part = WeightTable(params=table.params, xi=w0.xi, w0=w0.values, phi=np.full(n, 2.0),
                       w=2.0 * w0.values, a=a[:n], b=b[:n], K=K, delta_gamma=float("nan"), log_w0=lw,
                       landmarks=landmarks, profile=_profile_of(table))
    phi, delta, info = build_phi(part)
    info["xi_window_end"] = float(w0.xi[-1])
    return WeightTable(params=table.params, xi=w0.xi, w0=w0.values, phi=phi.values,
                       w=w0.values * phi.values, a=a[:n], b=b[:n], K=K, delta_gamma=delta, log_w0=lw,
                       landmarks=landmarks, profile=part.profile, extras=info)


def weight_ode_residual(weight: WeightTable) -> float:
    """Max over interior nodes of |(a w0)' + (b - c) w0| / ((1 + |b - c|) w0).

    (a w0)' is formed as a w0 (ln(a w0))', the logarithm differenced by the
    non-uniform three-point centered formula.  Differencing a w0 itself loses
    everything in the free zone, where it grows double-exponentially."""
    xi = weight.xi
    c = weight.params.speed
    L = np.log(weight.a) + weight.log_w0
    dL = np.gradient(L, xi)
    bc = weight.b - c
    res = np.abs(weight.a * dL + bc) / (1.0 + np.abs(bc))
    return float(np.max(res[1:-1]))


def congested_decay_slope(weight: WeightTable, xi_right: float = -3.0) -> float:
    """Least-squares slope of ln w0 over the table nodes left of xi_right."""
    m = weight.xi <= xi_right
    if np.count_nonzero(m) < 3:
        raise RangeError("too few nodes in the congested zone")
    return float(np.polyfit(weight.xi[m], weight.log_w0[m], 1)[0])


def double_exponential_slope(weight: WeightTable, lo: float = 5.0) -> float:
    """Least-squares slope of ln ln w0 where ln w0 > lo and xi > xi~."""
    lm = weight.landmarks
    start = lm.xi_tilde if lm is not None else 0.0
    m = (weight.log_w0 > lo) & (weight.xi > start)
    if np.count_nonzero(m) < 3:
        raise RangeError("too few nodes where w0 grows")
    return float(np.polyfit(weight.xi[m], np.log(weight.log_w0[m]), 1)[0])


def comparison_constant(weight: WeightTable) -> float:
    """Smallest C with e^{sqrt(gamma) xi} <= C w at every node."""
    g = weight.params.gamma
    return float(np.exp(np.max(math.sqrt(g) * weight.xi - weight.log_w)))
