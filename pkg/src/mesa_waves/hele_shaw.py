"""Limit traveling wave of the incompressible (Hele-Shaw) problem.

With the interface pinned at xi = 0:
    P = 1 - e^xi,  N = 1              for xi < 0,
    P = 0,         N = (1 - 1/c) e^{-xi/c}   for xi > 0,
and the flux J = cN + N P' is continuous across the interface (J(0) = c - 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GridSpec, ParameterError

__all__ = ["HsProfile", "hs_pressure", "hs_density", "hs_flux", "hs_pressure_slope",
           "hs_complementarity_residual"]


@dataclass(frozen=True)
class HsProfile:
    speed: float

    def __post_init__(self):
        if not (isinstance(self.speed, (int, float, np.floating, np.integer))
                and math.isfinite(self.speed) and self.speed > 1):
            raise ParameterError(f"the limit wave needs speed > 1, got {self.speed!r}")

    @property
    def jump(self) -> float:
        """Density just right of the interface."""
        return 1.0 - 1.0 / self.speed


def _out(x, v):
    return float(v) if np.ndim(x) == 0 else v


def hs_pressure(p: HsProfile, xi):
    x = np.asarray(xi, float)
    return _out(xi, np.where(x < 0, -np.expm1(np.minimum(x, 0.0)), 0.0))


def hs_pressure_slope(p: HsProfile, xi):
    x = np.asarray(xi, float)
    return _out(xi, np.where(x < 0, -np.exp(np.minimum(x, 0.0)), 0.0))


def hs_density(p: HsProfile, xi):
    """1 on the congested side; right limit 1 - 1/c at the interface itself."""
    x = np.asarray(xi, float)
    free = p.jump * np.exp(-np.maximum(x, 0.0) / p.speed)
    return _out(xi, np.where(x < 0, 1.0, free))


def hs_flux(p: HsProfile, xi):
    c = p.speed
    x = np.asarray(xi, float)
    left = c - np.exp(np.minimum(x, 0.0))
    right = c * p.jump * np.exp(-np.maximum(x, 0.0) / c)
    return _out(xi, np.where(x < 0, left, right))


def hs_complementarity_residual(p: HsProfile, grid) -> float:
    """max over the grid of |P (P'' + 1 - P)| and |(1 - N) P|.

    `grid` is a GridSpec or an explicit node array; P'' uses the three-point
    stencil on each maximal run of nodes that stays on one side of xi = 0."""
    xi = grid.nodes() if isinstance(grid, GridSpec) else np.asarray(grid, float)
    xi = np.sort(xi)
    P = hs_pressure(p, xi)
    N = hs_density(p, xi)
    excl = np.abs((1.0 - N) * P)
    worst = float(np.max(excl)) if excl.size else 0.0
    side = xi < 0
    for mask in (side, ~side):
        x, y = xi[mask], P[mask]
        if x.size < 3:
            continue
        h0, h1 = np.diff(x)[:-1], np.diff(x)[1:]
        d2 = 2.0 * (h0 * y[2:] - (h0 + h1) * y[1:-1] + h1 * y[:-2]) / (h0 * h1 * (h0 + h1))
        r = np.abs(y[1:-1] * (d2 + 1.0 - y[1:-1]))
        worst = max(worst, float(np.max(r)))
    return worst
