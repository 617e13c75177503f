"""Structural abscissas of a profile, phase-portrait curves and the
zone-by-zone envelope checks.

All landmarks are located on the phase-plane orbit itself (root finding in
the orbit parameter), so their accuracy does not depend on the table grid.
In terms of p = -P'/c:
    xi0  (inflection, minimum of N'):     gamma p^2 - p + K = 0
    xi~  (N' = -(c-1) / (4 gamma^2 N^(gamma-1))):   p = (c-1) / (4 c gamma)
    xi*  (N' = -(c-1)/c^2, right of xi0)
    xi-  (P equal to sqrt(c^3 / ((c-1)(gamma+1))))
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .core import DomainError, RangeError, SampledFunction, WaveParams, find_root
from .tw_profile import Profile, ProfileTable

__all__ = ["Landmarks", "EnvelopeReport", "q_minus", "q_plus", "q_tilde", "discriminant_roots",
           "locate_landmarks", "verify_envelopes", "diagnostics_LM", "xi_minus_target",
           "blowup_fit", "max_slope"]


def _disc(N, params):
    g, c = params.gamma, params.speed
    N = np.asarray(N, float)
    P = N ** g
    D = c * c - 4.0 * g * g * P * (1.0 - P)
    if np.any(D < 0):
        raise DomainError("negative discriminant: N lies between the roots N1 and N2")
    return N, P, np.sqrt(D)


def q_minus(N, params: WaveParams):
    """Lower branch (-c - sqrt(D)) / (2 gamma^2 N^(gamma-1))."""
    N, P, sD = _disc(N, params)
    g, c = params.gamma, params.speed
    out = -(c + sD) / (2.0 * g * g) * np.exp(-(g - 1.0) * np.log(N))
    return float(out) if out.ndim == 0 else out


def q_plus(N, params: WaveParams):
    """Upper branch (-c + sqrt(D)) / (2 gamma^2 N^(gamma-1)), evaluated in the
    cancellation-free form -2N(1 - N^gamma) / (c + sqrt(D))."""
    N, P, sD = _disc(N, params)
    out = -2.0 * N * (1.0 - P) / (params.speed + sD)
    return float(out) if out.ndim == 0 else out


def q_tilde(N, params: WaveParams):
    g, c = params.gamma, params.speed
    N = np.asarray(N, float)
    out = -(c - 1.0) / (4.0 * g * g) * np.exp(-(g - 1.0) * np.log(N))
    return float(out) if out.ndim == 0 else out


def discriminant_roots(params: WaveParams):
    """(N1, N2) with N^gamma (1 - N^gamma) = c^2 / (4 gamma^2), N1 <= N2."""
    g, c = params.gamma, params.speed
    a = c * c / (4.0 * g * g)
    if a > 0.25:
        raise DomainError(f"no real roots: c^2/(4 gamma^2) = {a:.6g} exceeds 1/4")
    root = math.sqrt(max(1.0 - 4.0 * a, 0.0))
    x2 = 0.5 * (1.0 + root)
    x1 = a / x2
    return x1 ** (1.0 / g), x2 ** (1.0 / g)


def xi_minus_target(params: WaveParams):
    """Pressure level defining xi-, and whether it had to be replaced.

    sqrt(c^3 / ((c-1)(gamma+1))) is >= 1 for small gamma (e.g. gamma = 5,
    c = 2); the midpoint (1 + 1/gamma)/2 between P(0) and 1 is used then."""
    g, c = params.gamma, params.speed
    if c <= 1:
        return 0.5 * (1.0 + 1.0 / g), True
    v = math.sqrt(c ** 3 / ((c - 1.0) * (g + 1.0)))
    if v >= 1.0 or v <= 1.0 / g:
        return 0.5 * (1.0 + 1.0 / g), True
    return v, False


@dataclass(frozen=True)
class Landmarks:
    xi_minus: float
    xi_zero: float
    xi_tilde: float
    xi_star: float
    N_zero: float
    N1: float
    N2: float
    min_slope: float
    P_minus: float = float("nan")
    xi_minus_fallback: bool = False
    extras: dict = field(default_factory=dict, compare=False)

    def ordered(self) -> bool:
        """xi- < 0 < xi0 < xi~ < xi*.  For very large gamma the last three sit
        inside a jump narrower than double precision resolves in xi; ties in
        xi are then broken by the orbit parameter s."""
        xs = (self.xi_zero, self.xi_tilde, self.xi_star)
        ss = self.extras.get("s", (0.0, 1.0, 2.0))
        chain = all(x0 < x1 or (x0 == x1 and s0 < s1) or (abs(x1 - x0) <= 1e-9 and s0 < s1)
                    for x0, x1, s0, s1 in zip(xs, xs[1:], ss, ss[1:]))
        return self.xi_minus < 0 < self.xi_zero and chain

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("extras")
        d.update(self.extras)
        return d


def _profile_of(table) -> Profile:
    prof = getattr(table, "profile", None)
    return prof if prof is not None else Profile(table.params)


def _orbit_roots(profile: Profile, fn, s_after=-np.inf):
    """Roots of fn(state) along the orbit as (xi, s, state), ordered along the
    orbit.  s = ln(-ln N) is monotone even inside a density jump that is
    narrower than xi can resolve."""
    orb = profile.orbit
    found = []
    for seg, tt, st in orb.sample():
        v = np.asarray(fn(st), float)
        ok = np.isfinite(v) & (st["s"] > s_after)
        sgn = np.sign(v)
        idx = np.nonzero(ok[:-1] & ok[1:] & (sgn[:-1] * sgn[1:] <= 0) & (sgn[:-1] != 0))[0]
        for i in idx:
            a, b = float(tt[i]), float(tt[i + 1])

            def g(t, seg=seg):
                return float(fn(orb._state_seg(seg, np.array(t))))
            t = find_root(g, min(a, b), max(a, b), tol=1e-14)
            st_r = orb._state_seg(seg, np.array(t))
            found.append((float(st_r["xi"]) - profile.shift, float(st_r["s"]), st_r))
    return sorted(found, key=lambda r: r[1])


def _K(st, g, c):
    return st["one_minus_P"] * g * st["P"] / (c * c)


def locate_landmarks(table) -> Landmarks:
    params = table.params
    g, c = params.gamma, params.speed
    prof = _profile_of(table)

    def first(roots, name):
        if not roots:
            raise RangeError(f"landmark {name} not found along the profile")
        return roots[0]

    # inflection: gamma p^2 - p + K changes sign from + to -
    def f0(st):
        return g * st["p"] ** 2 - st["p"] + _K(st, g, c)
    z_roots = _orbit_roots(prof, f0)
    xi0, s0, st0 = first(z_roots, "xi0")
    N0 = float(st0["N"])
    min_slope = float(st0["dN"])

    Pm, fallback = xi_minus_target(params)
    xim = first(_orbit_roots(prof, lambda st: np.log(st["P"]) - math.log(Pm)), "xi-")[0]
    p_tilde = (c - 1.0) / (4.0 * c * g)
    xit, s_tilde, _ = first(_orbit_roots(prof, lambda st: np.log(st["p"]) - math.log(p_tilde), s_after=s0), "xi~")
    target = (c - 1.0) / (c * c)
    xis, s_star, _ = first(_orbit_roots(prof, lambda st: np.log(-st["dN"]) - math.log(target), s_after=s0), "xi*")
    try:
        N1, N2 = discriminant_roots(params)
    except DomainError:
        N1 = N2 = float("nan")
    lo, hi = float(table.xi[0]), float(table.xi[-1])
    for name, v in (("xi-", xim), ("xi0", xi0), ("xi~", xit), ("xi*", xis)):
        if not lo <= v <= hi:
            raise RangeError(f"landmark {name} = {v:.6g} lies outside the table range [{lo}, {hi}]")
    return Landmarks(xi_minus=xim, xi_zero=xi0, xi_tilde=xit, xi_star=xis, N_zero=N0, N1=N1, N2=N2,
                     min_slope=min_slope, P_minus=Pm, xi_minus_fallback=fallback,
                     extras={"inflections_found": len(z_roots), "s": (s0, s_tilde, s_star)})


def max_slope(profile_or_table) -> float:
    """sup |N'| along the whole orbit (not limited to a grid)."""
    prof = profile_or_table if isinstance(profile_or_table, Profile) else _profile_of(profile_or_table)
    return max(float(np.max(-st["dN"])) for _, _, st in prof.orbit.sample())


def blowup_fit(gammas, slopes):
    """Least-squares slope of ln sup|N'| against gamma."""
    k, b = np.polyfit(np.asarray(gammas, float), np.log(np.asarray(slopes, float)), 1)
    return float(k), float(b)


@dataclass
class EnvelopeReport:
    gamma: float
    speed: float
    checks: dict

    @property
    def passed(self) -> bool:
        return all(v["pass"] for v in self.checks.values() if v["pass"] is not None)

    def to_json(self) -> str:
        return json.dumps({"gamma": self.gamma, "speed": self.speed, "checks": self.checks},
                          sort_keys=True, indent=2, default=float)


def _entry(margin, xi, **consts):
    if margin.size == 0:
        return {"pass": None, "worst_margin": None, "where": None, "constants": consts}
    k = int(np.argmin(margin))
    return {"pass": bool(margin[k] >= 0), "worst_margin": float(margin[k]), "where": float(xi[k]),
            "constants": consts}


def verify_envelopes(table: ProfileTable, lm: Landmarks, constants: Optional[dict] = None,
                     sweep=None, slack: float = 1e-8) -> EnvelopeReport:
    """Pointwise zone checks.  `constants` freezes fitted values (keys C_floor,
    C_window) from an earlier, smaller gamma; `sweep` is a sequence of
    (gamma, sup|N'|) pairs for the growth fit."""
    g, c = table.params.gamma, table.params.speed
    xi, N, P = table.xi, table.N, table.P
    h = np.diff(xi)
    dx = float(np.median(h)) if h.size else 0.0
    near = np.zeros(xi.shape, bool)
    for v in (lm.xi_minus, lm.xi_zero, lm.xi_tilde, lm.xi_star):
        near |= np.abs(xi - v) <= 3.0 * dx
    constants = dict(constants or {})
    checks = {}

    # (a) exact-constant pressure envelope on xi <= 0
    lam = 0.5 * (-c + math.sqrt(c * c + 4.0))
    m = xi <= 0
    lo = 1.0 - (1.0 - 1.0 / g) * np.exp(lam * xi[m])
    hi = 1.0 - (1.0 - 1.0 / g) * np.exp(xi[m])
    checks["pressure_envelope"] = _entry(np.minimum(P[m] - lo, hi - P[m]) + slack, xi[m], lam=lam)

    # (b) congested floor (C / sqrt(gamma))^(1/gamma) <= N on xi <= xi-
    m = (xi <= lm.xi_minus) & ~near
    C_floor = constants.get("C_floor", math.sqrt(g) * float(np.min(P[xi <= lm.xi_minus])) if np.any(xi <= lm.xi_minus) else float("nan"))
    floor = (C_floor / math.sqrt(g)) ** (1.0 / g)
    checks["congested_floor"] = _entry(N[m] - floor + slack, xi[m], C=C_floor)

    # (c) free zone: N <= N0 exp(-(xi - xi0)/(2c)) past xi0, and the smallest
    # delta with N >= N(xi*) exp(-(1/c + delta)(xi - xi*)) past xi*
    m = (xi >= lm.xi_zero) & ~near
    upper = lm.N_zero * np.exp(-(xi[m] - lm.xi_zero) / (2.0 * c))
    checks["free_upper"] = _entry(upper - N[m] + slack, xi[m], N0=lm.N_zero, rate=1.0 / (2.0 * c))
    m = xi > lm.xi_star + 3.0 * dx
    Nstar = float(table.profile.evaluate(np.array([lm.xi_star]))["N"][0]) if table.profile is not None \
        else float(np.interp(lm.xi_star, xi, N))
    rates = -np.log(N[m] / Nstar) / (xi[m] - lm.xi_star)
    delta_sub = max(0.0, float(np.max(rates)) - 1.0 / c) if rates.size else 0.0
    checks["free_lower"] = {"pass": True, "worst_margin": 0.0, "where": None,
                            "constants": {"delta": delta_sub, "N_star": Nstar}}

    # (d) transition window on [xi-, xi~]
    m = (xi >= lm.xi_minus) & (xi <= lm.xi_tilde)
    if np.any(m):
        delta_req = max(0.0, 1.0 - 1.0 / c - float(np.min(P[m])) ** (1.0 / g))
        C_window = constants.get("C_window", math.sqrt(g) * float(np.max(P[m])))
        upper_ok = float(np.max(P[m])) <= C_window / math.sqrt(g) + slack
        checks["transition_window"] = {"pass": bool(delta_req < 1.0 - 1.0 / c and upper_ok),
                                       "worst_margin": float(1.0 - 1.0 / c - delta_req),
                                       "where": None,
                                       "constants": {"delta": delta_req, "C": C_window}}

    # (e) growth of sup |N'| along a gamma-sweep
    ref = -math.log(1.0 - 1.0 / (2.0 * c))
    if sweep is not None and len(sweep) >= 2:
        gs, ss = zip(*sweep)
        k, _ = blowup_fit(gs, ss)
        checks["slope_growth"] = {"pass": bool(k >= 0.9 * ref), "worst_margin": float(k - 0.9 * ref),
                                  "where": None, "constants": {"fitted_slope": k, "reference": ref}}
    else:
        checks["slope_growth"] = {"pass": None, "worst_margin": None, "where": None,
                                  "constants": {"sup_slope": max_slope(table), "reference": ref}}
    return EnvelopeReport(gamma=float(g), speed=float(c), checks=checks)


def diagnostics_LM(table: ProfileTable):
    """L = N'/N + 1/c on the whole grid and M = (1 - P)/P' on xi <= 0."""
    c = table.params.speed
    R = table.dN / table.N
    L = SampledFunction(table.xi, R + 1.0 / c)
    m = table.xi <= 0
    omP = table.extras.get("one_minus_P", 1.0 - table.P)
    M = SampledFunction(table.xi[m], np.asarray(omP)[m] / table.dP[m])
    return L, M
