"""Time stepping: the free flow, Strang splitting and a Picard (Duhamel) reference."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .grid import Field, GridSpec, fftn, ifftn
from .observables import DiagnosticsRow, diagnostics_row
from .potential import PotentialOnGrid, convolve_array


class EvolutionError(RuntimeError):
    """Raised when the solution stops being finite."""

    def __init__(self, msg: str, t: float, step: int):
        super().__init__(msg)
        self.t = t
        self.step = step


@dataclass
class EvolveConfig:
    """Run parameters.

    ``dt`` is a step magnitude; the direction comes from ``t_end - t_start``.
    When the span is not a multiple of ``dt`` the step is shrunk so it is.
    Snapshots are stored every ``sample_stride`` steps and diagnostics rows
    every ``diagnostics_every`` steps; both always include the endpoints.
    """

    dt: float
    t_end: float
    t_start: float = 0.0
    sample_stride: int = 1
    diagnostics_every: int = 1
    scheme: str = "strang"
    r_list: tuple = (4.0, 6.0)
    alpha: float = 2.0
    a: float = 1.0
    sigma: Optional[float] = None
    boundary_threshold: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.sample_stride < 1 or self.diagnostics_every < 1:
            raise ValueError("sample_stride and diagnostics_every must be >= 1")
        if self.scheme not in ("strang", "picard"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def steps(self) -> int:
        span = abs(self.t_end - self.t_start)
        return int(math.ceil(span / self.dt - 1e-9)) if span > 0 else 0

    @property
    def signed_dt(self) -> float:
        k = self.steps
        return (self.t_end - self.t_start) / k if k else 0.0


@dataclass
class Trajectory:
    times: list
    fields: list
    rows: list
    config: EvolveConfig
    boundary_flag: bool = False
    max_boundary_fraction: float = 0.0

    @property
    def final(self) -> Field:
        return self.fields[-1]

    def at(self, t: float, tol: float = 1e-9) -> Field:
        for s, f in zip(self.times, self.fields):
            if abs(s - t) <= tol * max(1.0, abs(t)):
                return f
        raise KeyError(f"no snapshot at t={t}")


def free_multiplier(grid: GridSpec, t: float) -> np.ndarray:
    return np.exp(-0.5j * t * grid.k2)


def free_propagate(u: Field, t: float) -> Field:
    """``U(t) u = exp(i t Delta / 2) u`` applied exactly on the Fourier side."""
    return Field(u.grid, ifftn(free_multiplier(u.grid, t) * fftn(u.values)), u.t + t)


def nonlinear_phase_step(values: np.ndarray, pot: PotentialOnGrid, dt: float) -> np.ndarray:
    """Exact flow of ``i u_t = (V * |u|^2) u`` over ``dt``: a pointwise phase."""
    if pot.is_zero:
        return values
    theta = convolve_array(pot, values.real**2 + values.imag**2)
    theta *= -dt
    phase = np.empty(theta.shape, dtype=complex)
    np.cos(theta, out=phase.real)
    np.sin(theta, out=phase.imag)
    return values * phase


def _row(values, vh, pot, t, cfg) -> DiagnosticsRow:
    return diagnostics_row(values, pot, t, r_list=cfg.r_list, sigma=cfg.sigma, alpha=cfg.alpha,
                           a=cfg.a, values_hat=vh)


def strang_evolve(u0: Field, pot: PotentialOnGrid, cfg: EvolveConfig,
                  diagnostics: bool = True) -> Trajectory:
    """Kinetic half step, nonlinear phase, kinetic half step.

    Consecutive half steps are fused, so each step costs one forward/inverse
    FFT pair plus the convolution.  A negative span runs backward in time.
    """
    if u0.grid != pot.grid:
        raise ValueError(f"grid mismatch: field on {u0.grid}, potential on {pot.grid}")
    g = u0.grid
    nsteps = cfg.steps
    dt = cfg.signed_dt
    half = free_multiplier(g, dt / 2)
    full = half * half
    t0 = cfg.t_start
    values = np.array(u0.values, dtype=complex)
    vh = fftn(values)
    times, fields, rows = [t0], [Field(g, values.copy(), t0)], []
    if diagnostics:
        rows.append(_row(values, vh, pot, t0, cfg))
    w_hat = half * vh
    for k in range(1, nsteps + 1):
        w = ifftn(w_hat)
        w = nonlinear_phase_step(w, pot, dt)
        w_hat = fftn(w)
        t = t0 + k * dt
        want_sample = k % cfg.sample_stride == 0 or k == nsteps
        want_row = diagnostics and (k % cfg.diagnostics_every == 0 or k == nsteps)
        if want_sample or want_row:
            vh = half * w_hat
            values = ifftn(vh)
            if not np.all(np.isfinite(values)):
                raise EvolutionError(f"non-finite solution at t={t}", t, k)
            if want_sample:
                times.append(t)
                fields.append(Field(g, values, t))
            if want_row:
                rows.append(_row(values, vh, pot, t, cfg))
            w_hat = half * vh
        else:
            w_hat = full * w_hat
    frac = max([r.boundary_fraction for r in rows], default=0.0)
    return Trajectory(times, fields, rows, cfg, frac > cfg.boundary_threshold, frac)


def evolve(u0: Field, pot: PotentialOnGrid, cfg: EvolveConfig, diagnostics: bool = True) -> Trajectory:
    if cfg.scheme == "picard":
        res = picard_iterate(u0, pot, cfg.t_end - cfg.t_start, dt_quad=cfg.dt)
        g = u0.grid
        times = list(res.times)
        fields = [Field(g, v, t) for t, v in zip(times, res.values)]
        rows = [_row(f.values, None, pot, f.t, cfg) for f in fields] if diagnostics else []
        frac = max([r.boundary_fraction for r in rows], default=0.0)
        return Trajectory(times, fields, rows, cfg, frac > cfg.boundary_threshold, frac)
    return strang_evolve(u0, pot, cfg, diagnostics)


# -- Picard iteration -----------------------------------------------------------------------

@dataclass
class PicardResult:
    times: np.ndarray
    values: list
    increments: list
    converged: bool
    diverged: bool
    iterations: int
    grid: GridSpec = None

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    @property
    def field(self) -> Field:
        return Field(self.grid, self.values[-1], float(self.times[-1]))


def picard_iterate(u0: Field, pot: PotentialOnGrid, interval, n_iter: int = 60, dt_quad: float = 1e-3,
                   tol: float = 1e-13, blowup: float = 1e3) -> PicardResult:
    """Fixed-point iteration of the Duhamel formula on ``[0, T]``.

    Works with the interaction-picture profile ``w(t) = U(-t) u(t)``, which
    solves ``w(t) = u0 - i int_0^t U(-s) [u (V * |u|^2)](s) ds``; the time
    integral is a cumulative trapezoid on a uniform grid of spacing ``dt_quad``.
    ``interval`` is ``T`` or ``(0, T)``; the start is the time stamp of
    ``u0``.  The first iterate is the free flow ``U(t) u0``.  Stops after
    ``n_iter`` sweeps or once the relative increment drops below ``tol``;
    warns and flags ``diverged`` if the increments grow.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    if not dt_quad > 0:
        raise ValueError("dt_quad must be positive")
    T = float(interval[1] - interval[0]) if np.ndim(interval) else float(interval)
    g = u0.grid
    k = max(1, int(math.ceil(abs(T) / dt_quad - 1e-9)))
    ts = np.linspace(0.0, T, k + 1)
    h = ts[1] - ts[0]
    prop = [free_multiplier(g, t) for t in ts]
    w0 = fftn(u0.values)
    W = np.broadcast_to(w0, (k + 1,) + g.shape).copy()
    incs, diverged, converged = [], False, False
    scale = max(float(np.sqrt(np.sum(np.abs(w0) ** 2))), 1e-300)
    it = 0
    for it in range(1, n_iter + 1):
        F = np.empty_like(W)
        for i in range(k + 1):
            u = ifftn(prop[i] * W[i])
            nl = u * convolve_array(pot, u.real**2 + u.imag**2) if not pot.is_zero else 0 * u
            F[i] = np.conj(prop[i]) * fftn(nl)
        new = np.empty_like(W)
        new[0] = w0
        acc = np.zeros_like(w0)
        for i in range(1, k + 1):
            acc = acc + 0.5 * h * (F[i - 1] + F[i])
            new[i] = w0 - 1j * acc
        inc = float(np.sqrt(np.max(np.sum(np.abs(new - W) ** 2, axis=tuple(range(1, g.n + 1)))))) / scale
        incs.append(inc)
        W = new
        if inc < tol:
            converged = True
            break
        growing = len(incs) > 3 and incs[-1] > incs[-2] > incs[-3] and inc > 1e3 * tol
        if not math.isfinite(inc) or inc > blowup or growing:
            diverged = True
            warnings.warn(f"Picard iteration diverging on [0, {T}] (increment {inc:.3g})",
                          RuntimeWarning, stacklevel=2)
            break
    values = [ifftn(prop[i] * W[i]) for i in range(k + 1)]
    t0 = u0.t
    return PicardResult(ts + t0, values, incs, converged, diverged, it, g)


def with_span(cfg: EvolveConfig, t_start: float, t_end: float, **kw) -> EvolveConfig:
    return replace(cfg, t_start=t_start, t_end=t_end, **kw)
