"""Experiment configuration, initial data, orchestration and persistence.

Configs are YAML files with an explicit ``schema_version``.  Every block has
a fixed set of keys; anything else is an error reported with its line.
"""
from __future__ import annotations

import copy
import itertools
import json
import math
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import io
from .grid import Field, GridSpec, lp_norm, make_grid, set_threads
from .observables import (decay_scan, energy, mass, morawetz_check, propagation_check,
                          window_search)
from .potential import (PotentialOnGrid, check_assumptions, gamma_windows, inverse_power,
                        load_tabulated, regularize, sample_potential, satisfied_windows,
                        zero_potential, WINDOWS)
from .propagator import EvolveConfig, Trajectory, strang_evolve
from .scattering import completeness_roundtrip, extract_asymptotic, wave_operator

SCHEMA_VERSION = 1
EXPERIMENTS = ("evolve", "scatter", "roundtrip", "morawetz", "sweep", "check-potential")


class ConfigError(ValueError):
    def __init__(self, msg: str, key: str = "", line: int | None = None):
        self.key, self.line = key, line
        where = f"{key}" + (f" (line {line})" if line else "")
        super().__init__(f"{where}: {msg}" if where else msg)


# -- schema ---------------------------------------------------------------------------------

_REQ = object()

SCHEMA: dict[str, Any] = {
    "schema_version": _REQ,
    "experiment": None,
    "output": "out",
    "threads": None,
    "grid": {"n": 3, "N": 48, "L": 16.0},
    "potential": {"kind": "inverse_power", "C": 1.0, "gamma": 2.5, "file": None, "zero_mode": "keep",
                  "regularize_j": None, "p1": None, "p2": None, "alpha": 2.0, "a": 1.0},
    "initial": {"kind": "gaussian", "amplitude": 1.0, "norm": None, "width": 1.0, "center": None,
                "velocity": None, "seed": None, "band": None, "path": None},
    "evolve": {"dt": 5e-3, "T": 1.0, "stride": 20, "diagnostics_every": 1, "sigma": None,
               "r_list": [4.0, 6.0]},
    "scatter": {"checkpoints": [5.0, 10.0, 20.0, 40.0], "tol": 1e-4},
    "roundtrip": {"T": 20.0, "richardson_T": None},
    "morawetz": {"t1": 0.0, "t2": None, "sigma": None, "propagation_R": None, "decay_r": None,
                 "window_eps": None, "window_ell": None},
    "sweep": {"experiment": "evolve", "gamma": None, "C": None, "amplitude": None, "workers": 1},
    "checks": {"mass_drift": 1e-11, "energy_drift": None, "h1_roundtrip": 1e-3, "mass_residual": 1e-10,
               "richardson_decreasing": True, "energy_budget": True, "increments_decreasing": True,
               "morawetz_tol": 1e-6, "morawetz_integrand_tol": 1e-8, "quad_rel": 1e-3,
               "windows": None},
}

_POSITIVE = {("grid", "N"), ("grid", "L"), ("evolve", "dt"), ("evolve", "stride"),
             ("evolve", "diagnostics_every"), ("initial", "width"), ("potential", "a"),
             ("roundtrip", "T"), ("scatter", "tol"), ("sweep", "workers")}


def _lines(node, prefix="", out=None) -> dict:
    """Map dotted key paths to source lines from a composed YAML node."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _lines(v, path, out)
    return out


def _merge(schema: dict, data: dict, lines: dict, prefix: str = "") -> dict:
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", prefix, lines.get(prefix))
    out = {}
    for k in data:
        path = f"{prefix}.{k}" if prefix else str(k)
        if k not in schema:
            raise ConfigError(f"unknown key (allowed: {', '.join(schema)})", path, lines.get(path))
    for k, default in schema.items():
        path = f"{prefix}.{k}" if prefix else k
        if isinstance(default, dict):
            out[k] = _merge(default, data.get(k) or {}, lines, path)
        elif k in data:
            out[k] = data[k]
        elif default is _REQ:
            raise ConfigError("required key missing", path)
        else:
            out[k] = copy.deepcopy(default)
    return out


def validate(cfg: dict, lines: dict | None = None) -> dict:
    lines = lines or {}
    cfg = _merge(SCHEMA, cfg, lines)
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {cfg['schema_version']!r} (expected {SCHEMA_VERSION})",
                          "schema_version", lines.get("schema_version"))
    if cfg["experiment"] is not None and cfg["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg['experiment']!r}", "experiment", lines.get("experiment"))
    for block, key in _POSITIVE:
        v = cfg[block][key]
        path = f"{block}.{key}"
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise ConfigError(f"must be a positive number, got {v!r}", path, lines.get(path))
    ini = cfg["initial"]
    if ini["kind"] not in ("gaussian", "random_band_limited", "from_file"):
        raise ConfigError(f"unknown initial kind {ini['kind']!r}", "initial.kind", lines.get("initial.kind"))
    if ini["kind"] == "random_band_limited":
        if ini["seed"] is None:
            raise ConfigError("random data needs a seed", "initial.seed", lines.get("initial"))
        if not (ini["band"] or 0) > 0:
            raise ConfigError("band must be positive", "initial.band", lines.get("initial.band"))
    if ini["kind"] == "from_file" and not ini["path"]:
        raise ConfigError("from_file needs a path", "initial.path", lines.get("initial"))
    pot = cfg["potential"]
    if pot["kind"] not in ("inverse_power", "tabulated_radial", "zero"):
        raise ConfigError(f"unknown potential kind {pot['kind']!r}", "potential.kind", lines.get("potential.kind"))
    if pot["kind"] == "tabulated_radial" and not pot["file"]:
        raise ConfigError("tabulated_radial needs a file", "potential.file", lines.get("potential"))
    if pot["zero_mode"] not in ("keep", "drop"):
        raise ConfigError("zero_mode must be keep or drop", "potential.zero_mode", lines.get("potential.zero_mode"))
    if cfg["experiment"] == "sweep" and cfg["sweep"]["experiment"] in ("sweep",):
        raise ConfigError("a sweep cannot nest another sweep", "sweep.experiment", lines.get("sweep.experiment"))
    return cfg


def load_config(path, seed: int | None = None) -> dict:
    """Parse and validate a config file; ``seed`` overrides ``initial.seed``."""
    text = Path(path).read_text()
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {exc}", "", mark.line + 1 if mark else None) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    if seed is not None:
        ini = data.setdefault("initial", {})
        if not isinstance(ini, dict):
            raise ConfigError("expected a mapping", "initial")
        ini["seed"] = int(seed)
    cfg = validate(data, _lines(node))
    cfg["_base"] = str(Path(path).resolve().parent)
    return cfg


def _resolve(cfg: dict, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else Path(cfg.get("_base", ".")) / q


# -- building blocks ------------------------------------------------------------------------------

def build_grid(cfg: dict) -> GridSpec:
    g = cfg["grid"]
    return make_grid(int(g["n"]), int(g["N"]), float(g["L"]))


def build_potential(cfg: dict, grid: GridSpec) -> PotentialOnGrid:
    p = cfg["potential"]
    if p["kind"] == "inverse_power":
        spec = inverse_power(float(p["C"]), float(p["gamma"]))
    elif p["kind"] == "tabulated_radial":
        spec = load_tabulated(_resolve(cfg, p["file"]))
    else:
        spec = zero_potential()
    if p["regularize_j"]:
        return regularize(spec, float(p["regularize_j"]), grid, zero_mode=p["zero_mode"])
    return sample_potential(spec, grid, zero_mode=p["zero_mode"])


def generate_initial_data(block: dict, grid: GridSpec, base: str = ".") -> Field:
    """Gaussian, seeded band-limited random, or a field file.

    The Gaussian is ``amplitude exp(-|x-c|^2/(2 w^2)) exp(i v.x)``, rescaled
    to L^2 norm ``norm`` when that key is set.  Random data draws complex
    Gaussian Fourier coefficients from ``numpy.random.default_rng(seed)``,
    keeps ``|k| <= band`` and rescales to L^2 norm ``amplitude``.
    """
    kind = block.get("kind", "gaussian")
    if kind == "gaussian":
        c = np.zeros(grid.n) if block.get("center") is None else np.asarray(block["center"], float)
        v = np.zeros(grid.n) if block.get("velocity") is None else np.asarray(block["velocity"], float)
        if c.shape != (grid.n,) or v.shape != (grid.n,):
            raise ConfigError(f"center and velocity need {grid.n} components", "initial")
        w = float(block.get("width", 1.0))
        r2 = sum((x - ci) ** 2 for x, ci in zip(grid.coords, c))
        phase = sum(x * vi for x, vi in zip(grid.coords, v))
        vals = float(block.get("amplitude", 1.0)) * np.exp(-r2 / (2 * w * w)) * np.exp(1j * phase)
        vals = np.broadcast_to(vals, grid.shape).astype(complex)
        if block.get("norm") is not None:
            nrm = lp_norm(vals, 2, grid)
            vals = vals * (float(block["norm"]) / nrm) if nrm > 0 else vals
        return Field(grid, vals, 0.0)
    if kind == "random_band_limited":
        if block.get("seed") is None:
            raise ConfigError("random data needs a seed", "initial.seed")
        band = float(block["band"])
        nyq = math.pi * grid.N / (2 * grid.L)
        if band > nyq:
            raise ConfigError(f"band {band} exceeds the Nyquist wavenumber {nyq:.6g}", "initial.band")
        rng = np.random.default_rng(int(block["seed"]))
        coef = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        coef[np.sqrt(grid.k2) > band] = 0.0
        vals = np.fft.ifftn(coef)
        nrm = lp_norm(vals, 2, grid)
        target = float(block.get("amplitude", 1.0))
        vals = vals * (target / nrm) if nrm > 0 else vals
        return Field(grid, vals, 0.0)
    if kind == "from_file":
        f = io.read_field(Path(base) / block["path"] if not Path(block["path"]).is_absolute() else block["path"])
        if f.grid != grid:
            raise ConfigError(f"field file grid {f.grid} differs from the configured grid", "initial.path")
        return f
    raise ConfigError(f"unknown initial kind {kind!r}", "initial.kind")


def evolve_config(cfg: dict, T: float | None = None, stride: int | None = None) -> EvolveConfig:
    e = cfg["evolve"]
    p = cfg["potential"]
    return EvolveConfig(dt=float(e["dt"]), t_end=float(e["T"] if T is None else T),
                        sample_stride=int(e["stride"] if stride is None else stride),
                        diagnostics_every=int(e["diagnostics_every"]),
                        r_list=tuple(float(r) for r in e["r_list"]),
                        alpha=float(p["alpha"]), a=float(p["a"]),
                        sigma=None if e["sigma"] is None else float(e["sigma"]))


# -- results -------------------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    value: Any
    threshold: Any

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: value={_fmt(self.value)} threshold={_fmt(self.threshold)}"


def _fmt(v):
    return f"{v:.3e}" if isinstance(v, float) else str(v)


@dataclass
class RunResult:
    experiment: str
    checks: list
    report: dict
    rows: list = field(default_factory=list)
    fields: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _drift_checks(traj: Trajectory, checks: dict) -> list[Check]:
    out = []
    m0 = traj.rows[0].mass
    if checks["mass_drift"] is not None:
        d = max(abs(math.sqrt(r.mass) - math.sqrt(m0)) for r in traj.rows) / max(math.sqrt(m0), 1e-300)
        out.append(Check("mass_drift", d < checks["mass_drift"], d, checks["mass_drift"]))
    if checks["energy_drift"] is not None:
        e0 = traj.rows[0].energy
        d = max(abs(r.energy - e0) for r in traj.rows) / (abs(e0) + 1)
        out.append(Check("energy_drift", d < checks["energy_drift"], d, checks["energy_drift"]))
    return out


def _traj_summary(traj: Trajectory) -> dict:
    r0, r1 = traj.rows[0], traj.rows[-1]
    return {"t_start": r0.t, "t_end": r1.t, "steps": traj.config.steps, "dt": traj.config.signed_dt,
            "initial": r0, "final": r1, "snapshots": len(traj.times),
            "boundary_flag": traj.boundary_flag, "max_boundary_fraction": traj.max_boundary_fraction}


def run_evolve(cfg: dict, grid, pot, u0) -> RunResult:
    traj = strang_evolve(u0, pot, evolve_config(cfg))
    return RunResult("evolve", _drift_checks(traj, cfg["checks"]), {"trajectory": _traj_summary(traj)},
                     traj.rows, list(zip(traj.times, traj.fields)))


def _stride_hitting(times, dt) -> int:
    steps = [int(round(t / dt)) for t in times]
    if any(abs(s * dt - t) > 1e-9 * max(1.0, t) for s, t in zip(steps, times)):
        raise ConfigError("checkpoints must be multiples of dt", "scatter.checkpoints")
    return max(1, math.gcd(*steps))


def run_scatter(cfg: dict, grid, pot, u0) -> RunResult:
    cps = [float(c) for c in cfg["scatter"]["checkpoints"]]
    dt = float(cfg["evolve"]["dt"])
    ec = evolve_config(cfg, T=max(cps), stride=_stride_hitting(cps, dt))
    traj = strang_evolve(u0, pot, ec)
    res = extract_asymptotic(traj, cps, pot, tol=cfg["scatter"]["tol"])
    ch = cfg["checks"]
    checks = _drift_checks(traj, ch)
    if ch["mass_residual"] is not None:
        rel = res.conservation_residuals["mass"] / max(math.sqrt(mass(u0)), 1e-300)
        checks.append(Check("mass_residual", rel < ch["mass_residual"], rel, ch["mass_residual"]))
    if ch["increments_decreasing"]:
        incs = [h for _, h in res.convergence_history[1:]]
        checks.append(Check("increments_decreasing", not res.diverging and
                            all(b < a for a, b in zip(incs, incs[1:])), incs, "decreasing"))
    checks.append(Check("hartree_tail_decreasing", res.hartree_tail_decreasing,
                        res.hartree_tail[-1][1] if res.hartree_tail else 0.0, "decreasing"))
    fields = [(c, traj.at(c)) for c in cps]
    return RunResult("scatter", checks, {"scatter": res, "trajectory": _traj_summary(traj)},
                     traj.rows, fields)


def run_roundtrip(cfg: dict, grid, pot, u0) -> RunResult:
    rt = cfg["roundtrip"]
    ec = evolve_config(cfg, T=float(rt["T"]))
    rep = completeness_roundtrip(u0, pot, float(rt["T"]), ec, richardson_T=rt["richardson_T"],
                                 h1_tol=cfg["checks"]["h1_roundtrip"] or 1e-3,
                                 mass_tol=cfg["checks"]["mass_residual"] or 1e-10,
                                 alpha=float(cfg["potential"]["alpha"]), a=float(cfg["potential"]["a"]))
    ch = cfg["checks"]
    checks = []
    if ch["h1_roundtrip"] is not None:
        checks.append(Check("h1_roundtrip", rep.relative_h1_error < ch["h1_roundtrip"],
                            rep.relative_h1_error, ch["h1_roundtrip"]))
    if ch["richardson_decreasing"]:
        checks.append(Check("richardson_decreasing", rep.richardson_decreasing,
                            [p.discrepancy for p in rep.richardson], "decreasing"))
    if ch["mass_residual"] is not None:
        checks.append(Check("mass_residual", rep.residuals["mass"] < ch["mass_residual"],
                            rep.residuals["mass"], ch["mass_residual"]))
    if ch["energy_budget"]:
        checks.append(Check("energy_budget", rep.energy_within_budget, rep.residuals["energy"],
                            rep.energy_budget))
    fields = [(0.0, rep.u0), (0.0, rep.u0_reconstructed), (float(rt["T"]), rep.u_plus)]
    return RunResult("roundtrip", checks, {"roundtrip": rep}, [], fields)


def run_morawetz(cfg: dict, grid, pot, u0) -> RunResult:
    m = cfg["morawetz"]
    ec = evolve_config(cfg)
    traj = strang_evolve(u0, pot, ec)
    t2 = float(m["t2"]) if m["t2"] is not None else ec.t_end
    ch = cfg["checks"]
    rep = morawetz_check(traj, pot, float(m["t1"]), t2, m["sigma"], tol_abs=ch["morawetz_tol"],
                         quad_rel=ch["quad_rel"], integrand_tol=ch["morawetz_integrand_tol"],
                         monotone_tol=ch["morawetz_tol"])
    checks = _drift_checks(traj, ch)
    checks += [Check("morawetz_integrand_nonnegative", rep.integrand_nonnegative, rep.min_integrand,
                     -ch["morawetz_integrand_tol"]),
               Check("morawetz_lhs_le_boundary", rep.lhs_le_boundary, rep.lhs, rep.rhs_boundary + rep.tolerance),
               Check("morawetz_boundary_le_bound", rep.boundary_le_bound, rep.rhs_boundary,
                     rep.rhs_bound + rep.tolerance),
               Check("dilation_monotone", rep.monotonicity_violations == 0, rep.monotonicity_violations, 0)]
    report: dict = {"morawetz": rep, "trajectory": _traj_summary(traj)}
    if m["propagation_R"] is not None:
        pr = propagation_check(u0, traj, float(m["propagation_R"]))
        report["propagation"] = pr
        checks.append(Check("propagation_estimate", pr.passed, max(l - r for l, r in zip(pr.lhs, pr.rhs)), 0.0))
    if m["decay_r"] is not None:
        report["decay"] = decay_scan(traj, float(m["decay_r"]))
    if m["window_eps"] is not None and m["window_ell"] is not None:
        report["window_search"] = window_search(traj, float(m["window_eps"]), float(m["window_ell"]),
                                                float(cfg["potential"]["alpha"]), float(cfg["potential"]["a"]))
    return RunResult("morawetz", checks, report, traj.rows, list(zip(traj.times, traj.fields)))


def run_check_potential(cfg: dict, grid, pot, u0=None) -> RunResult:
    p = cfg["potential"]
    a = float(p["a"])
    report: dict = {"grid": grid}
    sw = satisfied_windows(pot, a) if pot.profile is not None else {"windows": {}, "witness": {}}
    report["windows"] = sw
    if p["kind"] == "inverse_power":
        gs = np.round(np.arange(0.1, grid.n + 0.05, 0.1), 10)
        gs = gs[gs < grid.n]
        report["gamma_windows"] = gamma_windows(grid.n, gs, a=a)
    checks = []
    if p["p1"] is not None and p["p2"] is not None:
        rep = check_assumptions(pot, float(p["p1"]), float(p["p2"]), float(p["alpha"]), a)
        report["assumptions"] = rep
        checks.append(Check("H1", rep.h1.passed, [rep.h1.near_norm, rep.h1.far_norm], "finite"))
        checks.append(Check("H2", rep.h2.passed, rep.h2.near_norm, "finite"))
        if rep.h3 is not None:
            checks.append(Check("H3", rep.h3.passed, rep.h3.best_A, "> 0"))
    expect = cfg["checks"]["windows"]
    if expect is None:
        expect = {w: True for w in ("cauchy", "wave_operators", "completeness")}
    for w, want in expect.items():
        if w not in WINDOWS:
            raise ConfigError(f"unknown window {w!r}", "checks.windows")
        got = bool(sw["windows"].get(w, False))
        checks.append(Check(f"window_{w}", got == bool(want), got, bool(want)))
    return RunResult("check-potential", checks, report)


RUNNERS: dict[str, Callable] = {"evolve": run_evolve, "scatter": run_scatter, "roundtrip": run_roundtrip,
                                "morawetz": run_morawetz, "check-potential": run_check_potential}


# -- orchestration ---------------------------------------------------------------------------------

def run_experiment(cfg: dict) -> RunResult:
    if cfg["experiment"] not in RUNNERS:
        raise ConfigError(f"no runnable experiment {cfg['experiment']!r}", "experiment")
    grid = build_grid(cfg)
    pot = build_potential(cfg, grid)
    kind = cfg["experiment"]
    u0 = None if kind == "check-potential" else generate_initial_data(cfg["initial"], grid, cfg.get("_base", "."))
    return RUNNERS[kind](cfg, grid, pot, u0)


def persist(result: RunResult, out: Path, cfg: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    fdir = out / "fields"
    if result.rows:
        io.write_diagnostics(out / "diagnostics.csv", result.rows)
    for i, (t, f) in enumerate(result.fields):
        io.write_field(fdir / f"u_{i:05d}.hsf", f)
    payload = {"schema_version": SCHEMA_VERSION, "experiment": result.experiment, "passed": result.passed,
               "checks": result.checks, "report": result.report,
               "config": {k: v for k, v in cfg.items() if not k.startswith("_")}}
    io.write_json(out / "report.json", payload, field_dir=fdir)


def _sweep_points(cfg: dict) -> list[dict]:
    s = cfg["sweep"]
    axes = {k: s[k] for k in ("gamma", "C", "amplitude") if s[k] is not None}
    if not axes:
        raise ConfigError("a sweep needs at least one axis (gamma, C, amplitude)", "sweep")
    names = list(axes)
    pts = []
    for combo in itertools.product(*(axes[k] for k in names)):
        sub = copy.deepcopy(cfg)
        sub["experiment"] = s["experiment"]
        label = []
        for k, v in zip(names, combo):
            if k == "amplitude":
                key = "norm" if sub["initial"]["norm"] is not None else "amplitude"
                sub["initial"][key] = v
            else:
                sub["potential"][k] = v
            label.append(f"{k}={v:g}")
        sub["_label"] = "_".join(label)
        pts.append(sub)
    return pts


def _sweep_task(args) -> dict:
    sub, out = args
    try:
        res = run_experiment(sub)
        persist(res, Path(out), sub)
        return {"label": sub["_label"], "passed": res.passed, "checks": [c.line() for c in res.checks]}
    except Exception as exc:
        return {"label": sub["_label"], "passed": False, "error": f"{type(exc).__name__}: {exc}"}


def run_sweep(cfg: dict, out: Path) -> RunResult:
    pts = _sweep_points(cfg)
    tasks = [(p, str(out / p["_label"])) for p in pts]
    workers = int(cfg["sweep"]["workers"])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    checks = [Check(f"sweep[{r['label']}]", r["passed"], r.get("error", "ok"), "all checks pass") for r in results]
    return RunResult("sweep", checks, {"points": results})


def execute(cfg: dict, out: Path, stream=None) -> int:
    """Run ``cfg``, write artifacts under ``out`` and print one line per check."""
    stream = stream or sys.stdout
    if cfg["experiment"] == "sweep":
        res = run_sweep(cfg, out)
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(out / "report.json", {"schema_version": SCHEMA_VERSION, "experiment": "sweep",
                                             "passed": res.passed, "checks": res.checks, "report": res.report})
    else:
        res = run_experiment(cfg)
        persist(res, out, cfg)
    for c in res.checks:
        print(c.line(), file=stream)
    return 0 if res.passed else 1


def error_payload(exc: BaseException) -> dict:
    d = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        d.update({"key": exc.key, "line": exc.line})
    else:
        d["traceback"] = traceback.format_exception_only(type(exc), exc)[-1].strip()
    return d


def configure_threads(threads: int | None) -> int | None:
    if threads is None and os.environ.get("HS_THREADS"):
        threads = int(os.environ["HS_THREADS"])
    set_threads(threads)
    return threads


def dump_error(exc: BaseException, out: Path | None) -> str:
    text = json.dumps(error_payload(exc), sort_keys=True)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return text
