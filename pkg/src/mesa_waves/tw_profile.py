"""Traveling-wave profiles N of  -cN' - gamma (N^gamma N')' = N (1 - N^gamma).

The orbit is integrated in the phase plane rather than in xi.  The
independent variable is s = ln(-ln N) and the unknown is p = -P'/c, which
stays in (0, 1] from the launch point next to N = 1 down to the exponential
tail.  xi, the flux J and the running integral of c / (gamma N^gamma) are
carried along as quadratures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .core import (GridSpec, ParameterError, RangeError, SolverError, WaveParams,
                   critical_speed, find_root)

__all__ = ["critical_speed", "launch_slope", "phase_rhs", "sharp_front", "Profile",
           "ProfileTable", "solve_profile", "ode_residual", "default_grid"]

N_MIN = 1e-8
STIFF_CUTOFF = 1e-16
RELAX_TOL = 1e-12
# exponents are clipped here; beyond it the orbit sits on its slow manifold
_EXP_CAP = 700.0
# offset of the running integral I; only differences of I are ever used
_I_OFFSET = 200.0
# the grid metric follows ln(p + _P_FLOOR): the exponential drop of p is
# resolved without piling nodes into the sub-1e-10 jump of very large gamma
_P_FLOOR = 1e-5
_P_WEIGHT = 3.0
_MIN_SPACING = 1e-11


def launch_slope(gamma: float, speed: float) -> float:
    """Decay rate of 1 - N at -infinity (positive root of l^2 + (c/gamma) l = 1)."""
    q = speed / (2.0 * gamma)
    return 1.0 / (math.sqrt(1.0 + q * q) + q)


def phase_rhs(N, V, params: WaveParams):
    """dN'/dN along a trajectory of the profile equation."""
    N = np.asarray(N, float)
    V = np.asarray(V, float)
    if np.any(V == 0):
        raise ParameterError("phase_rhs is singular at V = 0")
    g, c = params.gamma, params.speed
    Pg = N ** g
    out = -(c * V + g * g * V * V * N ** (g - 1) + N * (1 - Pg)) / (g * Pg * V)
    return float(out) if out.ndim == 0 else out


def sharp_front(gamma: float, xi):
    """Front at the critical speed: (1 - exp(c* xi))^(1/gamma) for xi < 0."""
    cs = critical_speed(gamma)
    x = np.asarray(xi, float)
    inside = x < 0
    base = -np.expm1(cs * np.where(inside, x, -1.0))
    out = np.where(inside, base ** (1.0 / gamma), 0.0)
    return float(out) if out.ndim == 0 else out


class _Segment:
    """One piece of the orbit: a dense solution in its own independent variable.

    kind "s":  t = s,      y = [p, xi, J_quad, logI, theta]
    kind "pi": t = ln p,   y = [s, xi, J_quad, logI, theta]
    kind "m":  t = s,      y = [xi, J_quad, logI, theta], p on the slow manifold
    """

    def __init__(self, kind, sol, orbit):
        self.kind = kind
        self.sol = sol
        self.orbit = orbit
        self.ts = sol.t
        self.ys = self.dense(sol.t)
        self.t0, self.t1 = float(sol.t[0]), float(sol.t[-1])
        self.xi_lo, self.xi_hi = float(self.ys[1][0]), float(self.ys[1][-1])

    def dense(self, t):
        """Five rows in the layout of kind "s" / "pi" at the parameter values t."""
        y = self.sol.sol(t)
        if self.kind == "m":
            p = self.orbit._manifold_p(np.asarray(t, float))
            return np.concatenate([np.reshape(p, (1,) + y.shape[1:]), y])
        return y

    def s_p(self, t):
        y = self.dense(t)
        if self.kind == "pi":
            return y[0], np.exp(t), y
        return np.asarray(t, float), y[0], y

    def dxi_dt(self, t):
        s, p, y = self.s_p(t)
        orb = self.orbit
        r = -np.exp(s)
        f_xi = -r * orb.g * np.exp(orb.g * r) / (orb.c * p)
        if self.kind != "pi":
            return f_xi
        K = -np.expm1(orb.g * r) * orb.g * np.exp(orb.g * r) / (orb.c ** 2 * p)
        return f_xi * p / (r * (1.0 - p - K))

    def t_of_xi(self, xi_raw):
        """Invert xi(t) inside the segment (monotone guess, then Newton)."""
        xr = np.asarray(xi_raw, float)
        xs, ts = self.ys[1], self.ts
        order = np.argsort(xs, kind="stable")
        t = np.interp(xr, xs[order], ts[order])
        lo, hi = min(self.t0, self.t1), max(self.t0, self.t1)
        for _ in range(12):
            y = self.dense(t)
            dt = (y[1] - xr) / self.dxi_dt(t)
            t = np.clip(t - dt, lo, hi)
            if np.all(np.abs(dt) <= 4e-16 * (1.0 + np.abs(t))):
                break
        return t


class _Orbit:
    """Raw phase-plane solution (xi not yet normalized).

    Unknown: p = -P'/c in (0, 1].  With s = ln(-ln N), r = ln N = -e^s and
    K = (1 - P) gamma P / c^2,
        dp/ds = r (1 - p - K / p),
    and the slope is recovered as N'/N = -c p / (gamma P).  For large gamma
    p drops almost linearly to K ~ 1e-20 or below (the density jump); that
    stretch is integrated with ln p as the independent variable.
    """

    SWITCH_P = 0.5
    SWITCH_RATIO = 1e-3

    def __init__(self, params: WaveParams, n_min: float = N_MIN):
        self.params = params
        g, c = float(params.gamma), float(params.speed)
        self.g, self.c = g, c
        self.lam = launch_slope(g, c)
        eps = max(1e-10, params.tol_ode)
        self.eps = eps
        tol = params.tol_ode
        self.tol = tol
        r0 = math.log1p(-eps)
        s0 = math.log(-r0)
        R0 = -self.lam * eps / (1.0 - eps)
        P0 = math.exp(g * r0)
        p0 = -g * P0 * R0 / c
        J0 = c * (1.0 - eps) * (1.0 - p0)
        self.I0 = _I_OFFSET * c / g
        y0 = np.array([p0, 0.0, J0, math.log(self.I0), 0.0])
        self.s_end = s_end = math.log(-math.log(n_min))
        atol_s = np.array([1e-300, tol, tol * 1e-2, tol, tol])

        def relaxed(t, y):
            return self._relaxed_event(t, y[0])
        relaxed.terminal = True
        relaxed.direction = -1

        def drop(t, y):
            return self._drop_event(t, y[0])
        drop.terminal = True
        drop.direction = -1

        self.segments = []
        sol = self._solve(self._rhs_s, (s0, s_end), y0, "Radau", atol_s, (relaxed, drop), jac=self._jac_s)
        self.segments.append(_Segment("s", sol, self))
        if sol.status == 1 and sol.t_events[1].size:
            # steep drop of p: continue in t = ln p until the orbit meets its
            # slow manifold p ~ K
            sB, yB = float(sol.t[-1]), sol.y[:, -1]
            zB = np.array([sB, yB[1], yB[2], yB[3], yB[4]])

            def leave(t, z):
                return self._exit_event(t, z)
            leave.terminal = True
            leave.direction = -1

            def reach_end(t, z):
                return s_end - z[0]
            reach_end.terminal = True
            reach_end.direction = -1
            solB = self._solve(self._rhs_pi, (math.log(yB[0]), -740.0), zB, "DOP853",
                               np.array([tol * 1e-3, tol, tol * 1e-2, tol, tol]), (leave, reach_end))
            self.segments.append(_Segment("pi", solB, self))
            sC = float(solB.y[0, -1])
            if solB.status == 1 and solB.t_events[0].size and self._relaxed_event(sC, self._manifold_p(sC)) > 0:
                # the transient off the manifold decays on the scale ds ~ K, so
                # the rest of the orbit is p = manifold(s) with quadratures only
                def relaxed_m(t, y):
                    return self._relaxed_event(t, self._manifold_p(t))
                relaxed_m.terminal = True
                relaxed_m.direction = -1
                solC = self._solve(self._rhs_m, (sC, s_end), solB.y[1:, -1], "DOP853",
                                   np.array([tol, tol * 1e-2, tol, tol]), (relaxed_m,))
                self.segments.append(_Segment("m", solC, self))
        last = self.segments[-1]
        self.end = self._state_seg(last, np.array(last.t1))
        if last.kind == "pi" and last.sol.t_events[0].size:
            # stopped right at the manifold: drop the decaying transient
            y = last.ys[:, -1]
            self.end = self._state_from(y[0], self._manifold_p(y[0]), y[1], y[3], y[4], y[2])
        for seg in self.segments:
            if not np.all(np.isfinite(seg.ys)):
                raise SolverError("non-finite state in phase-plane integration", {"gamma": g, "speed": c})
            _, pp, _ = seg.s_p(seg.ts)
            if np.any(pp <= 0) or np.any(pp > 1 + 1e-9):
                raise SolverError("orbit left the admissible strip (N' >= 0 or P' < -c)",
                                  {"gamma": g, "speed": c, "p_min": float(np.min(pp)),
                                   "p_max": float(np.max(pp))})
            if np.any(np.diff(seg.ys[1]) < 0):
                raise SolverError("xi failed to increase along the orbit", {"gamma": g, "speed": c})
        self.xi0 = 0.0
        self.xi1 = float(self.end["xi"])

    def _solve(self, fun, span, y0, method, atol, events, **kw):
        sol = solve_ivp(fun, span, y0, method=method, rtol=self.tol, atol=atol,
                        dense_output=True, events=list(events), **kw)
        if sol.status < 0:
            raise SolverError("phase-plane integration failed: " + sol.message,
                              {"gamma": self.g, "speed": self.c, "last_t": float(sol.t[-1]),
                               "method": method})
        return sol

    # -- right-hand sides ------------------------------------------------
    def _fields(self, s, p, logI):
        g, c = self.g, self.c
        r = -math.exp(s)
        P = math.exp(g * r)
        omP = -math.expm1(g * r)
        N = math.exp(r)
        K = omP * g * P / (c * c)
        f_p = r * (1.0 - p - K / p)
        f_xi = -r * g * P / (c * p)
        f_J = r * N * omP * g * P / (c * p)
        f_L = -r * math.exp(-logI) / p
        q = _P_WEIGHT * f_p / (p + _P_FLOOR)
        f_th = math.sqrt(f_xi * f_xi + (N * r) ** 2 + (g * r) ** 2 + q * q)
        return r, K, f_p, f_xi, f_J, f_L, f_th

    def _rhs_s(self, s, y):
        _, _, f_p, f_xi, f_J, f_L, f_th = self._fields(s, y[0], y[3])
        return np.array([f_p, f_xi, f_J, f_L, f_th])

    def _jac_s(self, s, y):
        p = y[0]
        r, K, f_p, f_xi, f_J, f_L, f_th = self._fields(s, p, y[3])
        jac = np.zeros((5, 5))
        jac[0, 0] = r * (-1.0 + K / (p * p))
        jac[1, 0] = -f_xi / p
        jac[2, 0] = -f_J / p
        jac[3, 0] = -f_L / p
        jac[3, 3] = -f_L
        q = _P_WEIGHT * f_p / (p + _P_FLOOR)
        dq = (_P_WEIGHT * jac[0, 0] - q) / (p + _P_FLOOR)
        jac[4, 0] = (-f_xi * f_xi / p + q * dq) / f_th
        return jac

    def _rhs_pi(self, t, z):
        p = math.exp(t)
        s = z[0]
        r, K, f_p, f_xi, f_J, f_L, f_th = self._fields(s, p, z[3])
        ds = p / f_p
        return np.array([ds, f_xi * ds, f_J * ds, f_L * ds, f_th * ds])

    # -- events ----------------------------------------------------------
    def _K(self, s):
        g, c = self.g, self.c
        r = -math.exp(s)
        return -math.expm1(g * r) * g * math.exp(g * r) / (c * c)

    def _relaxed_event(self, s, p):
        # stop once the orbit is both deep in the stiff free zone and relaxed
        # onto its slow manifold N'/N = -1/c; beyond that point the tail is explicit
        g, c = self.g, self.c
        r = -math.exp(s)
        stiff = g * r + math.log(g * (g + 1.0) / (c * c)) - math.log(STIFF_CUTOFF)
        if p <= 0:
            return stiff
        relaxed = abs(math.log(c * c * p / g) - g * r) - RELAX_TOL
        return max(stiff, relaxed)

    def _drop_event(self, s, p):
        if p <= 0:
            return -1.0
        return max(math.log(p / self.SWITCH_P), math.log(self._K(s) / (p * self.SWITCH_RATIO)))

    def _exit_event(self, t, z):
        # on the slow manifold dp/ds ~ dK/ds, i.e. delta ~ gamma K (1-2P)/(1-P)
        p = math.exp(t)
        g, c = self.g, self.c
        P = math.exp(-g * math.exp(z[0]))
        K = self._K(z[0])
        on_manifold = abs(g * g * P * (1.0 - 2.0 * P)) / (c * c)
        return (1.0 - p - K / p) - 1e-8 - 4.0 * on_manifold

    def _manifold_p(self, s):
        """Slow manifold of dp/ds = r (1 - p - K/p): p = K m with
        m = 1 / (1 - K m (1 + g1) - K^2 g1 (1 + g1)), g1 = gamma (1-2P)/(1-P)."""
        g, c = self.g, self.c
        r = -np.exp(s)
        P = np.exp(g * r)
        omP = -np.expm1(g * r)
        K = omP * g * P / (c * c)
        g1 = g * (1.0 - 2.0 * P) / omP
        m = np.ones_like(K)
        for _ in range(4):
            m = 1.0 / (1.0 - K * m * (1.0 + g1) - K * K * g1 * (1.0 + g1))
        return K * m

    def _rhs_m(self, s, y):
        p = float(self._manifold_p(s))
        _, _, f_p, f_xi, f_J, f_L, f_th = self._fields(s, p, y[2])
        return np.array([f_xi, f_J, f_L, f_th])

    # -- evaluation --------------------------------------------------------
    def _state_seg(self, seg, t):
        s, p, y = seg.s_p(t)
        return self._state_from(s, p, y[1], y[3], y[4], y[2])

    def _state_from(self, s, p, xi, logI, theta, J_quad):
        g, c = self.g, self.c
        s = np.asarray(s, float)
        r = -np.exp(s)
        N = np.exp(r)
        P = np.exp(g * r)
        rho = np.log(c * p / g) - g * r
        R = -np.exp(rho)
        return {"s": s, "r": r, "rho": rho, "p": p, "N": N, "R": R, "dN": R * N, "P": P,
                "one_minus_P": -np.expm1(g * r), "one_minus_N": -np.expm1(r),
                "dP": -c * p, "xi": xi, "J": c * N * (1.0 - p), "J_quad": J_quad,
                "logI": logI, "theta": theta}

    def state_at_xi(self, xi_raw):
        """All orbit quantities at raw abscissas inside [xi0, xi1]."""
        xr = np.atleast_1d(np.asarray(xi_raw, float))
        out = None
        for k, seg in enumerate(self.segments):
            last = k == len(self.segments) - 1
            m = (xr >= seg.xi_lo) & ((xr < seg.xi_hi) | (last & (xr <= seg.xi_hi)))
            if k == 0:
                m |= xr < seg.xi_lo
            if last:
                m |= xr > seg.xi_hi
            if not np.any(m):
                continue
            st = self._state_seg(seg, seg.t_of_xi(xr[m]))
            if out is None:
                out = {key: np.empty(xr.shape) for key in st}
            for key, v in st.items():
                out[key][m] = v
        return out

    def xi_at_s(self, s_target):
        """Raw xi where the orbit passes s = s_target."""
        for seg in self.segments:
            if seg.kind != "pi":
                if seg.t0 <= s_target <= seg.t1:
                    return float(seg.dense(s_target)[1])
            else:
                s_lo, s_hi = float(seg.ys[0][0]), float(seg.ys[0][-1])
                if s_lo <= s_target <= s_hi:
                    t = find_root(lambda tt: float(seg.sol.sol(tt)[0]) - s_target, seg.t1, seg.t0)
                    return float(seg.sol.sol(t)[1])
        raise SolverError("requested point lies outside the integrated orbit",
                          {"s": s_target, "gamma": self.g, "speed": self.c})

    def sample(self, n_per_segment=4001):
        """Dense samples along the whole orbit (for grids and root brackets)."""
        parts = []
        for seg in self.segments:
            tt = np.linspace(seg.t0, seg.t1, n_per_segment)
            tt = np.union1d(tt, seg.ts)
            if seg.t1 < seg.t0:
                tt = tt[::-1]
            parts.append((seg, tt, self._state_seg(seg, tt)))
        return parts


def _logaddexp_signed(la, lb_sign, lb):
    """log(e^la + sign * e^lb) assuming the result is positive."""
    if lb_sign >= 0:
        return np.logaddexp(la, lb)
    return la + np.log1p(-np.exp(lb - la))


@dataclass(frozen=True, eq=False)
class ProfileTable:
    """Sampled traveling wave on a strictly increasing grid."""
    params: WaveParams
    xi: np.ndarray
    N: np.ndarray
    dN: np.ndarray
    P: np.ndarray
    dP: np.ndarray
    J: np.ndarray
    residual: np.ndarray
    profile: Optional["Profile"] = field(default=None, repr=False)
    extras: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("xi", "N", "dN", "P", "dP", "J", "residual"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.xi.size

    @property
    def log_N(self):
        return self.extras.get("log_N", np.log(self.N))

    def column(self, name):
        return getattr(self, name) if hasattr(self, name) else self.extras[name]


class Profile:
    """Normalized traveling wave evaluable at any xi (orbit plus analytic tails)."""

    def __init__(self, params: WaveParams, n_min: float = N_MIN):
        if not params.speed > critical_speed(params.gamma):
            raise ParameterError("speed must exceed the critical speed")
        self.params = params
        self.orbit = orb = _Orbit(params, n_min=n_min)
        g = params.gamma
        # normalization: N = gamma^(-1/gamma), i.e. P = 1/gamma, at xi = 0
        s_norm = math.log(math.log(g) / g)
        self.shift = orb.xi_at_s(s_norm)
        self.xi_left = orb.xi0 - self.shift
        self.xi_right = orb.xi1 - self.shift
        self.cut = orb.end

    @property
    def gamma(self):
        return self.params.gamma

    @property
    def speed(self):
        return self.params.speed

    def evaluate(self, xi) -> dict:
        """All profile quantities at the abscissas xi (any real values)."""
        xi = np.atleast_1d(np.asarray(xi, float))
        g, c = self.params.gamma, self.params.speed
        orb = self.orbit
        out = {k: np.empty_like(xi) for k in
               ("r", "rho", "p", "N", "dN", "P", "dP", "J", "logI", "theta", "one_minus_P",
                  "one_minus_N", "s")}
        left = xi < self.xi_left
        right = xi > self.xi_right
        mid = ~(left | right)
        if np.any(mid):
            st = orb.state_at_xi(xi[mid] + self.shift)
            for k in out:
                out[k][mid] = st[k]
        if np.any(left):
            d = xi[left] - self.xi_left
            lam = orb.lam
            m = orb.eps * np.exp(lam * d)
            r = np.log1p(-m)
            N = 1.0 - m
            R = -lam * m / N
            P = np.exp(g * r)
            out["r"][left] = r
            out["N"][left] = N
            out["one_minus_N"][left] = m
            out["one_minus_P"][left] = -np.expm1(g * r)
            out["rho"][left] = np.log(lam * m / N)
            out["dN"][left] = R * N
            out["P"][left] = P
            out["dP"][left] = g * P * R
            out["p"][left] = -g * P * R / c
            out["J"][left] = c * N + N * g * P * R
            I = orb.I0 + (c / g) * (d + g * orb.eps * np.expm1(lam * d) / lam)
            if np.any(I <= 0):
                raise RangeError("requested abscissa too far into the congested tail")
            out["logI"][left] = np.log(I)
            out["theta"][left] = d
            out["s"][left] = np.log(-r)
        if np.any(right):
            e = self.cut
            d = xi[right] - self.xi_right
            R = float(e["R"])
            r = float(e["r"]) + R * d
            N = np.exp(r)
            P = np.exp(g * r)
            out["r"][right] = r
            out["N"][right] = N
            out["one_minus_N"][right] = -np.expm1(r)
            out["one_minus_P"][right] = -np.expm1(g * r)
            out["rho"][right] = math.log(-R)
            out["dN"][right] = R * N
            out["P"][right] = P
            out["dP"][right] = g * P * R
            out["p"][right] = -g * P * R / c
            out["J"][right] = c * N + N * g * P * R
            # I' = c / (gamma P) grows like exp(k d) with k = -gamma R
            k = -g * R
            lA = math.log(c / (g * k)) - g * float(e["r"])
            lIc = float(e["logI"])
            # log(I_c + A (e^{kd} - 1)) = log(A e^{kd} + (I_c - A))
            lead = lA + k * d
            diff = math.exp(lIc) - math.exp(lA) if max(lIc, lA) < 700 else None
            if diff is None:
                # the A e^{kd} term dominates whenever I_c is astronomically large
                out["logI"][right] = np.logaddexp(lead, lIc) if lIc >= lA else lead
            else:
                out["logI"][right] = lead + np.log1p(diff * np.exp(-lead))
            out["theta"][right] = float(e["theta"]) + d * math.sqrt(1.0 + R * R)
            out["s"][right] = np.log(-r)
        out["xi"] = xi
        return out

    def arc_length(self, xi):
        """Monotone metric used for adaptive grids."""
        return self.evaluate(xi)["theta"]


def default_grid(params: WaveParams, xi_min=-15.0, xi_max=15.0, ds=None) -> GridSpec:
    if ds is None:
        ds = 2e-3
    return GridSpec.adaptive(xi_min, xi_max, ds)


def _adaptive_nodes(profile: Profile, grid: GridSpec):
    a, b, ds = grid.xi_min, grid.xi_max, grid.target_arc_length
    pieces = []
    lo, hi = max(a, profile.xi_left), min(b, profile.xi_right)
    if a < lo:
        n = max(int(math.ceil((lo - a) / ds)), 1) + 1
        pieces.append(np.linspace(a, lo, n))
    if lo < hi:
        # equispaced in theta + xi along the orbit, restricted to [lo, hi]
        xs, th = [], []
        for _, _, st in profile.orbit.sample():
            xs.append(st["xi"] - profile.shift)
            th.append(st["theta"] + st["xi"])
        xs = np.concatenate(xs)
        th = np.maximum.accumulate(np.concatenate(th))
        keep = (xs >= lo) & (xs <= hi)
        xs, th = xs[keep], th[keep]
        t_lo = np.interp(lo, xs, th)
        t_hi = np.interp(hi, xs, th)
        n = max(int(math.ceil((t_hi - t_lo) / ds)), 1) + 1
        targets = np.linspace(t_lo, t_hi, n)
        # invert theta -> xi piecewise linearly, then leave xi as the abscissa
        nodes = np.interp(targets, th, xs)
        nodes[0], nodes[-1] = lo, hi
        pieces.append(nodes)
    if hi < b:
        n = max(int(math.ceil((b - hi) / ds)), 1) + 1
        pieces.append(np.linspace(hi, b, n))
    # for very large gamma the density jump is narrower than xi can resolve;
    # nodes are kept at least _MIN_SPACING apart
    nodes = np.unique(np.round(np.concatenate(pieces) / _MIN_SPACING) * _MIN_SPACING)
    nodes[0], nodes[-1] = a, b
    return nodes


def _pointwise_residual(xi, N, P, gamma, speed, dN=None):
    # with the slope stored, only the diffusive flux is differenced; without
    # it N is differenced twice (noisier by a factor 1/h on steep stretches)
    if dN is None:
        dN = np.gradient(N, xi)
    flux = P * dN
    return (-speed * dN - gamma * np.gradient(flux, xi) - N * (1.0 - P)) / (1.0 + np.abs(N * (1.0 - P)))


def solve_profile(params: WaveParams, grid: Optional[GridSpec] = None,
                  n_min: float = N_MIN) -> ProfileTable:
    """Traveling wave for (gamma, c) sampled on `grid`, normalized by P(0) = 1/gamma."""
    if not isinstance(params, WaveParams):
        raise ParameterError("params must be a WaveParams")
    if grid is None:
        grid = default_grid(params)
    profile = Profile(params, n_min=n_min)
    if grid.policy == "uniform":
        xi = grid.nodes()
    else:
        xi = _adaptive_nodes(profile, grid)
    ev = profile.evaluate(xi)
    N, P = ev["N"], ev["P"]
    if not (np.all(N > 0) and np.all(N < 1) and np.all(ev["dN"] < 0)):
        raise SolverError("profile left the admissible strip", {"gamma": params.gamma, "speed": params.speed})
    res = np.zeros_like(xi)
    if xi.size >= 3:
        res = _pointwise_residual(xi, N, P, params.gamma, params.speed, ev["dN"])
        res[0] = res[-1] = 0.0
    extras = {"log_N": ev["r"], "rho": ev["rho"], "logI": ev["logI"], "s": ev["s"],
              "one_minus_P": ev["one_minus_P"], "one_minus_N": ev["one_minus_N"]}
    return ProfileTable(params=params, xi=xi, N=N, dN=ev["dN"], P=P, dP=ev["dP"], J=ev["J"],
                        residual=res, profile=profile, extras=extras)


def ode_residual(table) -> float:
    """Max normalized defect of the profile equation by centered differences
    on the stored grid (interior nodes only).  The stored slope dN is used
    when the table carries one; the flux N^gamma N' is differenced."""
    xi = np.asarray(table.xi, float)
    N = np.asarray(table.N, float)
    g = table.params.gamma
    c = table.params.speed
    P = N ** g
    dN = getattr(table, "dN", None)
    res = _pointwise_residual(xi, N, P, g, c, None if dN is None else np.asarray(dN, float))
    return float(np.max(np.abs(res[1:-1])))
