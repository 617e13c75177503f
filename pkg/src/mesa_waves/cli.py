"""Command-line front end.

    mesa-waves profile --gamma 5 --speed 1.5
    mesa-waves landmarks --gamma 10 --speed 2 --format json
    mesa-waves gap --gamma 10 --speed 2
    mesa-waves evolve --gamma 5 --speed 2 --h 1e-3 --t-final 20 --check
    mesa-waves sweep --gammas 5,10,20 --speed 2 --jobs 3 --check
    mesa-waves figures --phase --gamma 5 --speed 2

Exit codes: 0 ok, 2 bad configuration, 3 solver failure, 4 a --check failed.
Failures print a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import ConfigError, GridSpec, MesaError, ParameterError, WaveParams
from .landmarks import locate_landmarks, max_slope, verify_envelopes
from .spectral import estimate_gap, fit_eta
from .tw_profile import solve_profile
from .weights import build_weights, weight_ode_residual

COMMANDS = ("profile", "landmarks", "weights", "gap", "evolve", "sweep", "figures")
DEFAULT_OUTPUT = "mesa_waves_out"
EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 2, 3, 4


class CheckFailed(MesaError):
    pass


@dataclass
class RunConfig:
    command: str
    gamma: float = 5.0
    speed: float = 2.0
    xi_min: float = -15.0
    xi_max: float = 15.0
    samples: Optional[int] = None
    ds: float = 2e-3
    dt: float = 1e-3
    dxi: float = 1e-2
    t_final: float = 1.0
    h: float = 1e-3
    trace_every: float = 0.5
    gammas: tuple = (5.0, 10.0, 20.0)
    figure_gammas: tuple = (5.0, 10.0, 20.0, 40.0)
    phase: bool = False
    profiles: bool = False
    output: str = DEFAULT_OUTPUT
    format: str = "csv"
    jobs: int = 1
    check: bool = False
    extras: dict = field(default_factory=dict)

    def params(self, gamma=None, speed=None) -> WaveParams:
        return WaveParams(float(self.gamma if gamma is None else gamma),
                          float(self.speed if speed is None else speed))

    def grid(self) -> GridSpec:
        return GridSpec.adaptive(self.xi_min, self.xi_max, self.ds)

    def digest(self) -> str:
        d = asdict(self)
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------- writers

def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return "" if x is None else str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO(newline="")
    wr = csv.writer(buf, lineterminator="\r\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_num(v) for v in r])
    return buf.getvalue()


def _plain(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def json_text(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


class Emitter:
    """Writes artifacts under one directory and keeps manifest.json in step."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.root = Path(cfg.output)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory {self.root}: {e}") from e
        if not os.access(self.root, os.W_OK):
            raise ConfigError(f"output directory {self.root} is not writable")
        self.written = []

    def _record(self, name, data: bytes):
        path = self.root / name
        path.write_bytes(data)
        self.written.append(name)
        mpath = self.root / "manifest.json"
        manifest = json.loads(mpath.read_text()) if mpath.exists() else {}
        manifest[name] = {"command": self.cfg.command, "config_hash": self.cfg.digest(),
                          "version": __version__, "sha256": hashlib.sha256(data).hexdigest()}
        mpath.write_text(json_text(manifest), encoding="utf-8")
        return path

    def table(self, stem, header, rows):
        if self.cfg.format == "json":
            recs = [dict(zip(header, r)) for r in rows]
            return self._record(stem + ".json", json_text(recs).encode("utf-8"))
        return self._record(stem + ".csv", csv_text(header, rows).encode("utf-8"))

    def document(self, stem, obj):
        if self.cfg.format == "json":
            return self._record(stem + ".json", json_text(obj).encode("utf-8"))
        flat = _flatten(_plain(obj))
        return self._record(stem + ".csv", csv_text(["key", "value"], sorted(flat.items())).encode("utf-8"))

    def figure(self, stem, fig):
        import matplotlib
        buf = io.BytesIO()
        with matplotlib.rc_context({"svg.hashsalt": "mesa-waves", "svg.fonttype": "path"}):
            fig.savefig(buf, format="svg", metadata={"Date": None})
        return self._record(stem + ".svg", buf.getvalue())


def _flatten(obj, prefix=""):
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}{k}."))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            out.update(_flatten(v, f"{prefix}{i}."))
    else:
        out[prefix[:-1]] = obj
    return out


# ---------------------------------------------------------------- commands

def cmd_profile(cfg, em):
    p = cfg.params()
    t = solve_profile(p, cfg.grid())
    if cfg.samples:
        xi = np.linspace(cfg.xi_min, cfg.xi_max, int(cfg.samples))
        ev = t.profile.evaluate(xi)
        cols = [xi, ev["N"], ev["P"], ev["dN"], ev["dP"], ev["J"]]
    else:
        cols = [t.xi, t.N, t.P, t.dN, t.dP, t.J]
    em.table(f"profile_g{_tag(p.gamma)}_c{_tag(p.speed)}", ["xi", "N", "P", "dN", "dP", "J"],
             zip(*cols))
    J = np.asarray(cols[5])
    return {"ok": bool(np.all(np.diff(J) <= 1e-9) and np.all(np.diff(cols[1]) < 0)), "nodes": len(cols[0])}


def cmd_landmarks(cfg, em):
    p = cfg.params()
    t = solve_profile(p, cfg.grid())
    lm = locate_landmarks(t)
    rep = verify_envelopes(t, lm)
    doc = {"params": p.as_dict(), "landmarks": lm.as_dict(), "ordered": lm.ordered(),
           "envelopes": rep.checks, "envelopes_pass": rep.passed, "max_slope": max_slope(t)}
    em.document(f"landmarks_g{_tag(p.gamma)}_c{_tag(p.speed)}", doc)
    return {"ok": bool(lm.ordered() and rep.passed)}


def cmd_weights(cfg, em):
    p = cfg.params()
    w = build_weights(solve_profile(p, cfg.grid()))
    stem = f"weights_g{_tag(p.gamma)}_c{_tag(p.speed)}"
    em.table(stem, ["xi", "log_w0", "w0", "phi", "a", "b"],
             zip(w.xi, w.log_w0, w.w0, w.phi, w.a, w.b))
    side = w.sidecar()
    side["ode_residual"] = weight_ode_residual(w)
    em.document(stem + "_meta", side)
    ok = (side["ode_residual"] <= 1e-5 and np.all(w.phi >= 1 - 1e-12) and np.all(w.phi <= 2 + 1e-12))
    return {"ok": bool(ok)}


def cmd_gap(cfg, em):
    p = cfg.params()
    w = build_weights(solve_profile(p, cfg.grid()))
    g = estimate_gap(w)
    doc = json.loads(g.to_json())
    em.document(f"gap_g{_tag(p.gamma)}_c{_tag(p.speed)}", doc)
    return {"ok": bool(g.gap > 0 and min(g.test_family_margins, default=0.0) >= -1e-9 * g.gap)}


def cmd_evolve(cfg, em):
    from .evolution import evolve, initial_between_shifts, localized_blend
    p = cfg.params()
    t = solve_profile(p, cfg.grid())
    w = build_weights(t)
    lm = w.landmarks
    st = initial_between_shifts(t, cfg.h, localized_blend(t, cfg.h, lm.xi_minus, 1.0),
                                dt=cfg.dt, dxi=cfg.dxi)
    _, tr = evolve(st, cfg.t_final, cfg.trace_every, weight=w)
    comp = tr.extras["comparison"]
    cum = tr.extras["dissipation_integral"]
    em.table(f"evolve_g{_tag(p.gamma)}_c{_tag(p.speed)}",
             ["t", "energy", "dissipation", "linf_u", "dissipation_integral", "comparison"],
             zip(tr.t, tr.energy, tr.dissipation, tr.linf_u, cum, comp))
    E = tr.energy
    ok = (float(np.max(comp)) <= 1e-8 and bool(np.all(np.diff(E) <= 1e-10))
          and cum[-1] <= 1.05 * E[0])
    return {"ok": bool(ok)}


def _sweep_one(args):
    gamma, speed, xi_min, xi_max, ds = args
    p = WaveParams(float(gamma), float(speed))
    t = solve_profile(p, GridSpec.adaptive(xi_min, xi_max, ds))
    w = build_weights(t)
    lm = w.landmarks
    g = estimate_gap(w, family=())
    Nstar = float(t.profile.evaluate([lm.xi_star])["N"][0])
    return {"gamma": float(gamma), "gap": g.gap, "K": w.K, "xi_minus": lm.xi_minus,
            "xi_tilde": lm.xi_tilde, "xi_star": lm.xi_star, "N_star": Nstar,
            "max_slope": max_slope(t), "ordered": lm.ordered(),
            "xi_minus_fallback": bool(lm.xi_minus_fallback)}


def sweep_rows(gammas, speed, xi_min=-15.0, xi_max=15.0, ds=2e-3, jobs=1):
    tasks = [(g, speed, xi_min, xi_max, ds) for g in gammas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    slope, eta = fit_eta([r["gamma"] for r in rows], [r["gap"] for r in rows]) if len(rows) > 1 \
        else (float("nan"), float("nan"))
    for r in rows:
        r["eta_fit"] = eta
    return rows, slope


def sweep_trends(rows, speed) -> dict:
    """Trend checks that must hold along any gamma-sweep."""
    g = np.array([r["gamma"] for r in rows])
    # xi- defined by the replacement pressure level does not follow the scaling
    own = np.array([not r.get("xi_minus_fallback", False) for r in rows])
    sm = np.abs([r["xi_minus"] for r in rows])[own] * np.sqrt(g[own]) if own.any() else np.ones(1)
    st = np.array([r["xi_tilde"] for r in rows]) * g
    jump = np.abs(np.array([r["N_star"] for r in rows]) - (1.0 - 1.0 / speed))
    return {
        "gap_positive": bool(all(r["gap"] > 0 for r in rows)),
        "ordered": bool(all(r["ordered"] for r in rows)),
        "xi_minus_scaling": bool(sm.max() <= 3.0 * sm.min()),
        "xi_tilde_scaling": bool(st.max() <= 3.0 * st.min()),
        "jump_decreasing": bool(np.all(np.diff(jump) < 0)),
    }


def cmd_sweep(cfg, em):
    gammas = sorted(float(x) for x in cfg.gammas)
    rows, slope = sweep_rows(gammas, cfg.speed, cfg.xi_min, cfg.xi_max, cfg.ds, cfg.jobs)
    header = ["gamma", "gap", "eta_fit", "K", "xi_minus", "xi_tilde", "xi_star", "N_star", "max_slope"]
    em.table(f"sweep_c{_tag(cfg.speed)}", header, ([r[k] for k in header] for r in rows))
    trends = sweep_trends(rows, cfg.speed)
    em.document(f"sweep_c{_tag(cfg.speed)}_trends", {"trends": trends, "log_gap_slope": slope})
    return {"ok": all(trends.values()), "trends": trends}


def cmd_figures(cfg, em):
    from .figures import check_phase_data, check_profile_data, phase_figure, profiles_figure
    both = not (cfg.phase or cfg.profiles)
    results = {}
    if cfg.profiles or both:
        speed = cfg.speed if cfg.profiles else 1.5
        fig, data = profiles_figure(cfg.figure_gammas, speed)
        em.figure("fig_profiles", fig)
        results["profiles"] = check_profile_data(data)
    if cfg.phase or both:
        gamma, speed = (cfg.gamma, cfg.speed) if cfg.phase else (5.0, 2.0)
        for zoom in (False, True):
            fig, data = phase_figure(gamma, speed, mark_tilde=zoom)
            em.figure("fig_phase_tilde" if zoom else "fig_phase", fig)
            results["phase_tilde" if zoom else "phase"] = check_phase_data(data)
    em.document("figures_checks", results)
    return {"ok": all(all(v.values()) for v in results.values()), "checks": results}


def _tag(x) -> str:
    return f"{float(x):g}".replace(".", "p")


HANDLERS = {"profile": cmd_profile, "landmarks": cmd_landmarks, "weights": cmd_weights,
            "gap": cmd_gap, "evolve": cmd_evolve, "sweep": cmd_sweep, "figures": cmd_figures}


def run(cfg: RunConfig) -> int:
    """Execute one configured command; returns the exit status."""
    if cfg.command not in HANDLERS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    em = Emitter(cfg)
    res = HANDLERS[cfg.command](cfg, em)
    summary = {"command": cfg.command, "files": em.written, "ok": res.get("ok", True)}
    print(json_text(summary), end="")
    if cfg.check and not res.get("ok", True):
        raise CheckFailed(f"{cfg.command}: check failed")
    return 0


# ---------------------------------------------------------------- parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError as e:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mesa-waves", description="traveling waves of the stiff-pressure "
                                                 "reaction porous-medium equation")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key = value file; flags override it")
    ap.add_argument("--gamma", type=float)
    ap.add_argument("--speed", type=float)
    ap.add_argument("--gammas", type=_floats, help="comma-separated list for sweep / figures")
    ap.add_argument("--xi-min", type=float)
    ap.add_argument("--xi-max", type=float)
    ap.add_argument("--samples", type=int, help="resample the profile on a uniform grid")
    ap.add_argument("--ds", type=float, help="target arc-length spacing of the adaptive grid")
    ap.add_argument("--dt", type=float)
    ap.add_argument("--dxi", type=float)
    ap.add_argument("--t-final", type=float)
    ap.add_argument("--h", type=float, help="shift size of the initial perturbation")
    ap.add_argument("--trace-every", type=float)
    ap.add_argument("--phase", action="store_true", default=None, help="figures: phase plane only")
    ap.add_argument("--profiles", action="store_true", default=None, help="figures: profiles only")
    ap.add_argument("--output", help=f"output directory (env MESA_WAVES_OUTPUT, default {DEFAULT_OUTPUT})")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--check", action="store_true", default=None)
    return ap


_TYPES = {"gamma": float, "speed": float, "xi_min": float, "xi_max": float, "samples": int,
          "ds": float, "dt": float, "dxi": float, "t_final": float, "h": float, "trace_every": float,
          "gammas": _floats, "figure_gammas": _floats, "output": str, "format": str, "jobs": int,
          "phase": "bool", "profiles": "bool", "check": "bool"}


def read_config_file(path) -> dict:
    cp = configparser.ConfigParser()
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as e:
        raise ConfigError(f"bad config file {path}: {e}") from e
    out = {}
    for key, raw in cp["run"].items():
        k = key.replace("-", "_")
        if k not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        kind = _TYPES[k]
        try:
            out[k] = cp["run"].getboolean(key) if kind == "bool" else kind(raw)
        except ValueError as e:
            raise ConfigError(f"bad value for {key}: {raw!r}") from e
    return out


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    values = {}
    if ns.config:
        values.update(read_config_file(ns.config))
    for k in _TYPES:
        v = getattr(ns, k, None)
        if v is not None:
            values[k] = v
    if ns.command == "figures" and ns.gammas is not None:
        values["figure_gammas"] = values.pop("gammas")
    if "output" not in values:
        values["output"] = os.environ.get("MESA_WAVES_OUTPUT") or DEFAULT_OUTPUT
    cfg = RunConfig(command=ns.command, **values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    if cfg.samples is not None and cfg.samples < 2:
        raise ConfigError("--samples must be at least 2")
    for name in ("dt", "dxi", "t_final", "h", "ds", "trace_every"):
        v = getattr(cfg, name)
        if not (math.isfinite(v) and v > 0):
            raise ConfigError(f"--{name.replace('_', '-')} must be positive")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("--format must be csv or json")
    # surfaces bad (gamma, speed) and grid bounds as configuration errors
    if cfg.command != "sweep":
        cfg.params()
    cfg.grid()


def _fail(code, exc):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    diag = getattr(exc, "diagnostics", None)
    if diag:
        err["diagnostics"] = diag
    sys.stderr.write(json.dumps(_plain(err), sort_keys=True, default=str) + "\n")
    return code


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except (ConfigError, ParameterError) as e:
        return _fail(EXIT_CONFIG, e)
    try:
        return run(cfg)
    except CheckFailed as e:
        return _fail(EXIT_CHECK, e)
    except (ConfigError, ParameterError) as e:
        return _fail(EXIT_CONFIG, e)
    except MesaError as e:
        return _fail(EXIT_SOLVER, e)
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as e:
        return _fail(EXIT_SOLVER, e)


if __name__ == "__main__":
    sys.exit(main())
