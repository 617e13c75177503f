"""Static figures.  Each builder returns (figure, data) where `data` holds
the arrays actually plotted, so the qualitative content can be asserted
without looking at pixels."""

from __future__ import annotations

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .core import WaveParams  # noqa: E402
from .hele_shaw import HsProfile, hs_density, hs_pressure  # noqa: E402
from .landmarks import discriminant_roots, locate_landmarks, q_minus, q_plus, q_tilde  # noqa: E402
from .tw_profile import solve_profile  # noqa: E402


def profiles_figure(gammas=(5.0, 10.0, 20.0, 40.0), speed=1.5, window=(-5.0, 5.0), n=2001):
    """Density and pressure for several gamma with the limit wave overlaid."""
    xi = np.linspace(window[0], window[1], n)
    hs = HsProfile(speed)
    data = {"xi": xi, "speed": float(speed), "gammas": [float(g) for g in gammas],
            "N": {}, "P": {}, "N_hs": hs_density(hs, xi), "P_hs": hs_pressure(hs, xi)}
    fig, (axn, axp) = plt.subplots(1, 2, figsize=(10, 4))
    for g in gammas:
        t = solve_profile(WaveParams(float(g), float(speed)))
        ev = t.profile.evaluate(xi)
        data["N"][float(g)] = ev["N"]
        data["P"][float(g)] = ev["P"]
        axn.plot(xi, ev["N"], lw=1.2, label=fr"$\gamma={g:g}$")
        axp.plot(xi, ev["P"], lw=1.2, label=fr"$\gamma={g:g}$")
    axn.plot(xi, data["N_hs"], "k--", lw=1.0, label="limit")
    axp.plot(xi, data["P_hs"], "k--", lw=1.0, label="limit")
    axn.set_title("density")
    axp.set_title("pressure")
    for ax in (axn, axp):
        ax.set_xlabel(r"$\xi$")
        ax.legend(fontsize=8)
    fig.tight_layout()
    return fig, data


def check_profile_data(data) -> dict:
    """Distance to the limit shrinks with gamma; P(0) = 1/gamma; densities
    fall from 1 and, right of the front, sit near the limit jump 1 - 1/c."""
    xi = data["xi"]
    gs = data["gammas"]
    dP = [float(np.max(np.abs(data["P"][g] - data["P_hs"]))) for g in gs]
    i0 = int(np.argmin(np.abs(xi)))
    right = (xi > 0.5) & (xi < 1.5)
    jump = 1.0 - 1.0 / data["speed"]
    last = gs[-1]
    return {
        "pressure_distance_decreasing": bool(np.all(np.diff(dP) < 0)),
        "normalized": bool(all(abs(data["P"][g][i0] - 1.0 / g) < 5e-2 for g in gs)),
        "monotone_density": bool(all(np.all(np.diff(data["N"][g]) <= 0) for g in gs)),
        "free_zone_near_limit": bool(np.max(np.abs(data["N"][last][right] - data["N_hs"][right]))
                                     < 0.5 * jump),
    }


def phase_figure(gamma=5.0, speed=2.0, mark_tilde=False, n=4000):
    """Orbit (N, N') with the curves Gamma_+, Gamma_- and Q~."""
    p = WaveParams(float(gamma), float(speed))
    t = solve_profile(p)
    lm = locate_landmarks(t)
    N1, N2 = discriminant_roots(p)
    keep = t.N > 1e-6
    N, dN = t.N[keep], t.dN[keep]
    lo = np.linspace(1e-3, N1, n)
    hi = np.linspace(N2, 1.0, max(n // 10, 50))
    data = {"gamma": float(gamma), "speed": float(speed), "N": N, "dN": dN, "N1": N1, "N2": N2,
            "N_zero": lm.N_zero, "slope_zero": lm.min_slope,
            "Gamma_plus": (np.concatenate([lo, hi]), np.concatenate([q_plus(lo, p), q_plus(hi, p)])),
            "Gamma_minus": (np.concatenate([lo, hi]), np.concatenate([q_minus(lo, p), q_minus(hi, p)])),
            "Q_tilde": (lo, q_tilde(lo, p))}
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(N, dN, "k", lw=1.6, label=r"$\Gamma$")
    for key, style, lab in (("Gamma_plus", "C0", r"$\Gamma_+$"), ("Gamma_minus", "C3", r"$\Gamma_-$")):
        x, y = data[key]
        split = lo.size
        ax.plot(x[:split], y[:split], style, lw=1.0, label=lab)
        ax.plot(x[split:], y[split:], style, lw=1.0)
    if mark_tilde:
        x, y = data["Q_tilde"]
        ax.plot(x, y, "C2--", lw=1.0, label=r"$\tilde Q$")
        ev = t.profile.evaluate([lm.xi_tilde])
        data["N_tilde"] = float(ev["N"][0])
        data["slope_tilde"] = float(ev["dN"][0])
        ax.plot([data["N_tilde"]], [data["slope_tilde"]], "C2o", ms=4)
    ax.plot([lm.N_zero], [lm.min_slope], "C3o", ms=4)
    ax.axvline(N1, color="0.6", lw=0.6, ls=":")
    ax.axvline(N2, color="0.6", lw=0.6, ls=":")
    ax.set_ylim(1.6 * lm.min_slope, 0.1)
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("N")
    ax.set_ylabel("N'")
    ax.legend(fontsize=8, loc="lower left")
    fig.tight_layout()
    return fig, data


def check_phase_data(data, rel=1e-8) -> dict:
    """Gamma stays below Gamma_+ on N < N1 and touches Gamma_- at its
    minimum N0 (horizontal tangent), with N0 < N1."""
    p = WaveParams(data["gamma"], data["speed"])
    N, dN = data["N"], data["dN"]
    m = N < data["N1"]
    qp = q_plus(N[m], p)
    below = bool(np.all(dN[m] <= qp + rel * np.abs(qp)))
    qm0 = q_minus(data["N_zero"], p)
    out = {"below_gamma_plus": below,
           "touches_gamma_minus": bool(abs(data["slope_zero"] - qm0) <= 1e-6 * abs(qm0)),
           "tangency_is_minimum": bool(data["slope_zero"] <= float(np.min(dN)) + 1e-9 * abs(qm0)),
           "N0_below_N1": bool(data["N_zero"] < data["N1"])}
    if "N_tilde" in data:
        out["tilde_on_Q_tilde"] = bool(abs(data["slope_tilde"] - q_tilde(data["N_tilde"], p))
                                       <= 1e-6 * abs(data["slope_tilde"]))
        out["tilde_below_N0"] = bool(data["N_tilde"] < data["N_zero"])
    return out
