"""Shared numeric substrate: parameters, sampled functions, grids,
monotone interpolation, quadrature and bracketed root finding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq


class MesaError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(MesaError, ValueError):
    pass


class DomainError(MesaError, ValueError):
    pass


class BracketError(MesaError, ValueError):
    pass


class RangeError(MesaError, ValueError):
    pass


class SolverError(MesaError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NumericalError(SolverError):
    pass


class StabilityError(SolverError):
    pass


class ConfigError(MesaError, ValueError):
    pass


def critical_speed(gamma: float) -> float:
    """Minimal admissible front speed sqrt(gamma / (gamma + 1))."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma!r}")
    return math.sqrt(gamma / (gamma + 1.0))


@dataclass(frozen=True)
class WaveParams:
    gamma: float
    speed: float
    tol_ode: float = 1e-10
    tol_root: float = 1e-12

    def __post_init__(self):
        for name in ("gamma", "speed", "tol_ode", "tol_root"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise ParameterError(f"{name} must be a finite real, got {v!r}")
        if not self.gamma > 1:
            raise ParameterError(f"gamma must exceed 1, got {self.gamma}")
        cstar = critical_speed(self.gamma)
        if not self.speed > cstar:
            raise ParameterError(
                f"speed {self.speed} must exceed the critical speed {cstar:.12g} for gamma={self.gamma}")
        if not (self.tol_ode > 0 and self.tol_root > 0):
            raise ParameterError("tolerances must be strictly positive")

    @property
    def critical(self) -> float:
        return critical_speed(self.gamma)

    def as_dict(self) -> dict:
        return {"gamma": float(self.gamma), "speed": float(self.speed),
                "tol_ode": float(self.tol_ode), "tol_root": float(self.tol_root)}


def _as_grid(xi, values=None):
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or xi.size < 2:
        raise DomainError("a sampled function needs at least two abscissas")
    if not np.all(np.diff(xi) > 0):
        raise DomainError("abscissas must be strictly increasing")
    if values is not None:
        values = np.asarray(values, dtype=float)
        if values.shape != xi.shape:
            raise DomainError(f"length mismatch: {xi.size} abscissas, {values.size} values")
    return xi, values


def _lagrange_slopes(x, y, width=5):
    """Nodal derivatives of the local Lagrange polynomial through `width`
    neighbouring samples (4th order on smooth data for width 5)."""
    n = x.size
    m = min(width, n)
    idx = np.arange(n)
    start = np.clip(idx - m // 2, 0, n - m)
    xs = x[start[:, None] + np.arange(m)[None, :]]
    ys = y[start[:, None] + np.arange(m)[None, :]]
    k = idx - start
    cols = np.arange(m)[None, :]
    at_k = cols == k[:, None]
    diff = x[:, None] - xs                      # x_k - x_l, zero in column k
    safe = np.where(at_k, 1.0, diff)
    d = np.sum(np.where(at_k, 0.0, 1.0 / safe), axis=1) * ys[idx, k]
    for j in range(m):
        xj = xs[:, j]
        skip = at_k | (cols == j)
        num = np.prod(np.where(skip, 1.0, diff), axis=1)
        den = np.prod(np.where(skip, 1.0, xj[:, None] - xs), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = num / den / (xj - x)
            d += np.where(k == j, 0.0, coef * ys[:, j])
    return d


def monotone_slopes(x, y):
    """High-order nodal slopes with a Fritsch-Carlson / Hyman limiter so that
    the cubic Hermite interpolant never overshoots monotone data."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size == 2:
        s = (y[1] - y[0]) / (x[1] - x[0])
        return np.array([s, s])
    delta = np.diff(y) / np.diff(x)
    d = _lagrange_slopes(x, y)
    left = np.concatenate([[delta[0]], delta])
    right = np.concatenate([delta, [delta[-1]]])
    same = np.sign(left) * np.sign(right) > 0
    bound = 3.0 * np.minimum(np.abs(left), np.abs(right))
    ok_sign = np.sign(d) == np.sign(left)
    d = np.where(same & ok_sign, np.sign(d) * np.minimum(np.abs(d), bound), 0.0)
    return d


@dataclass(frozen=True, eq=False)
class SampledFunction:
    xi: np.ndarray
    values: np.ndarray
    _spline: Optional[CubicHermiteSpline] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        xi, values = _as_grid(self.xi, self.values)
        xi = xi.copy()
        values = values.copy()
        xi.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.xi.size

    @property
    def spline(self) -> CubicHermiteSpline:
        if self._spline is None:
            sp = CubicHermiteSpline(self.xi, self.values, monotone_slopes(self.xi, self.values),
                                    extrapolate=False)
            object.__setattr__(self, "_spline", sp)
        return self._spline

    def __call__(self, xi):
        return interpolate(self, xi)


def interpolate(f: SampledFunction, xi):
    """Monotonicity-preserving cubic interpolation; exact at the nodes.
    Queries outside the sample range raise DomainError."""
    q = np.asarray(xi, dtype=float)
    lo, hi = f.xi[0], f.xi[-1]
    if np.any(~np.isfinite(q)) or np.any(q < lo) or np.any(q > hi):
        raise DomainError(f"query outside [{lo}, {hi}]")
    out = f.spline(q)
    # pin exact nodal values (the spline already matches them up to rounding)
    pos = np.searchsorted(f.xi, q)
    pos = np.clip(pos, 0, f.xi.size - 1)
    hit = f.xi[pos] == q
    out = np.where(hit, f.values[pos], out)
    return float(out) if np.ndim(xi) == 0 else out


def integrate(f: SampledFunction, a: float, b: float, method: str = "hermite") -> float:
    """Integral of the sampled function over [a, b].

    method="hermite" integrates the monotone cubic interpolant exactly
    (fourth order on smooth data); method="trapezoid" integrates the
    piecewise-linear interpolant (exact for piecewise-linear data).
    Reversed bounds give the negated value."""
    if a == b:
        return 0.0
    sign = 1.0
    if a > b:
        a, b, sign = b, a, -1.0
    lo, hi = f.xi[0], f.xi[-1]
    if a < lo or b > hi:
        raise DomainError(f"integration bounds [{a}, {b}] outside [{lo}, {hi}]")
    if method == "hermite":
        return sign * float(f.spline.integrate(a, b))
    if method == "trapezoid":
        inner = (f.xi > a) & (f.xi < b)
        x = np.concatenate([[a], f.xi[inner], [b]])
        y = np.interp(x, f.xi, f.values)
        return sign * float(np.trapezoid(y, x))
    raise ValueError(f"unknown quadrature method {method!r}")


def cumulative_integral(x, y, method: str = "hermite"):
    """Running integral from x[0] at every node."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    h = np.diff(x)
    seg = 0.5 * h * (y[:-1] + y[1:])
    if method == "hermite" and x.size > 2:
        d = _lagrange_slopes(x, y)
        seg = seg + h * h * (d[:-1] - d[1:]) / 12.0
    return np.concatenate([[0.0], np.cumsum(seg)])


def find_root(g: Callable[[float], float], a: float, b: float, tol: float = 1e-12,
              maxiter: int = 200) -> float:
    """Bracketed root of g on [a, b] (Brent: bisection / secant / inverse
    quadratic hybrid that never leaves the bracket)."""
    ga, gb = g(a), g(b)
    if not (np.isfinite(ga) and np.isfinite(gb)):
        raise BracketError(f"non-finite function values at bracket ends: {ga}, {gb}")
    if ga == 0:
        return float(a)
    if gb == 0:
        return float(b)
    if ga * gb > 0:
        raise BracketError(f"no sign change on [{a}, {b}]: g(a)={ga:.3e}, g(b)={gb:.3e}")
    scale = max(1.0, abs(a), abs(b))
    return float(brentq(g, a, b, xtol=tol * scale, rtol=4 * np.finfo(float).eps, maxiter=maxiter))


@dataclass(frozen=True)
class GridSpec:
    """Either `n` uniformly spaced nodes or an adaptive grid whose nodes
    are (approximately) equispaced in a problem-defined arc length."""
    xi_min: float
    xi_max: float
    n: Optional[int] = None
    target_arc_length: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.xi_min) and math.isfinite(self.xi_max)) or not self.xi_min < self.xi_max:
            raise ParameterError(f"need xi_min < xi_max, got [{self.xi_min}, {self.xi_max}]")
        if (self.n is None) == (self.target_arc_length is None):
            raise ParameterError("specify exactly one of n (uniform) or target_arc_length (adaptive)")
        if self.n is not None and int(self.n) < 2:
            raise ParameterError("uniform grid needs n >= 2")
        if self.target_arc_length is not None and not self.target_arc_length > 0:
            raise ParameterError("target_arc_length must be positive")

    @classmethod
    def uniform(cls, xi_min, xi_max, n):
        return cls(float(xi_min), float(xi_max), n=int(n))

    @classmethod
    def adaptive(cls, xi_min, xi_max, target_arc_length):
        return cls(float(xi_min), float(xi_max), target_arc_length=float(target_arc_length))

    @property
    def policy(self) -> str:
        return "uniform" if self.n is not None else "adaptive"

    def nodes(self, arc_length: Optional[Callable] = None) -> np.ndarray:
        """Grid nodes. For the adaptive policy `arc_length(xi)` must be a
        non-decreasing callable; nodes are placed at equal increments of it."""
        if self.n is not None:
            return np.linspace(self.xi_min, self.xi_max, int(self.n))
        if arc_length is None:
            n = int(math.ceil((self.xi_max - self.xi_min) / self.target_arc_length)) + 1
            return np.linspace(self.xi_min, self.xi_max, max(n, 2))
        return equidistribute(arc_length, self.xi_min, self.xi_max, self.target_arc_length)

    def as_dict(self) -> dict:
        return {"xi_min": self.xi_min, "xi_max": self.xi_max, "policy": self.policy,
                "n": self.n, "target_arc_length": self.target_arc_length}


def equidistribute(arc_length: Callable, a: float, b: float, ds: float, probe: int = 20001):
    """Nodes on [a, b] at equal increments `ds` of a monotone arc length."""
    xs = np.linspace(a, b, probe)
    s = np.asarray(arc_length(xs), float)
    s = np.maximum.accumulate(s)
    # every node also keeps a spacing no larger than ds in xi itself
    s = s + (xs - a)
    total = s[-1] - s[0]
    n = max(int(math.ceil(total / ds)), 1) + 1
    targets = np.linspace(s[0], s[-1], n)
    nodes = np.interp(targets, s, xs)
    nodes[0], nodes[-1] = a, b
    return np.unique(nodes)
