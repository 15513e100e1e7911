"""Interaction picture, asymptotic states, wave operators and round trips."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .grid import Field, fftn, h1_norm, ifftn, lp_norm
from .observables import energy, hartree_term, kinetic_energy, mass
from .potential import PotentialOnGrid, check_H3
from .propagator import EvolveConfig, Trajectory, free_multiplier, free_propagate, strang_evolve


def interaction_picture(u: Field) -> Field:
    """``U(-t) u(t)``; the time stamp is kept."""
    return Field(u.grid, ifftn(free_multiplier(u.grid, -u.t) * fftn(u.values)), u.t)


def from_interaction_picture(w: Field) -> Field:
    """Inverse of :func:`interaction_picture`."""
    return Field(w.grid, ifftn(free_multiplier(w.grid, w.t) * fftn(w.values)), w.t)


def relative_h1(a: Field, b: Field) -> float:
    """``||a - b||_{H^1} / ||b||_{H^1}`` (absolute when ``b = 0``)."""
    d = h1_norm(a - b)
    s = h1_norm(b)
    return d / s if s > 0 else d


@dataclass
class ScatterResult:
    u_plus: Field
    checkpoints: list
    convergence_history: list
    converged: bool
    diverging: bool
    conservation_residuals: dict
    hartree_tail: list
    hartree_tail_decreasing: bool
    boundary_flag: bool = False


def extract_asymptotic(traj: Trajectory, checkpoints: Sequence[float], pot: PotentialOnGrid | None = None,
                       tol: float = 1e-4) -> ScatterResult:
    """Interaction-picture states at the checkpoints and their ``H^1`` increments.

    ``u_plus`` is the state at the last checkpoint.  Residuals compare it with
    the conserved mass and energy of the initial snapshot.  Negative
    checkpoints are allowed for a backward trajectory as long as they move
    monotonically away from the start.
    """
    cps = [float(c) for c in checkpoints]
    if len(cps) < 3:
        raise ValueError("need at least 3 checkpoints")
    d = np.diff(np.abs(cps))
    if np.any(d <= 0) or len({math.copysign(1, c) for c in cps}) > 1:
        raise ValueError(f"checkpoints must move monotonically away from 0: {cps}")
    states = [interaction_picture(traj.at(c)) for c in cps]
    hist = [(cps[0], math.nan)]
    for prev, cur, c in zip(states, states[1:], cps[1:]):
        hist.append((c, relative_h1(cur, prev)))
    incs = [h for _, h in hist[1:]]
    # growth at roundoff level is not divergence
    diverging = len(incs) >= 2 and incs[-1] > incs[-2] and incs[-1] > tol
    u0 = traj.fields[0]
    u_plus = states[-1]
    if traj.rows:
        e0 = traj.rows[0].energy
    elif pot is not None:
        e0 = energy(u0, pot)
    else:
        raise ValueError("need diagnostics rows or the potential to evaluate the initial energy")
    res = {"mass": abs(math.sqrt(mass(u_plus)) - math.sqrt(mass(u0))),
           "energy": abs(kinetic_energy(u_plus) - e0)}
    res["energy_relative"] = res["energy"] / abs(e0) if e0 else res["energy"]
    if traj.rows:
        tail = [(r.t, r.hartree) for r in traj.rows if abs(r.t) >= abs(cps[0]) - 1e-9]
    elif pot is not None:
        tail = [(c, hartree_term(traj.at(c), pot)) for c in cps]
    else:
        tail = []
    tail_vals = [abs(p) for _, p in tail]
    tail_dec = len(tail_vals) < 2 or tail_vals[-1] <= tail_vals[0]
    return ScatterResult(u_plus, cps, hist, bool(incs[-1] < tol), bool(diverging), res,
                         tail, bool(tail_dec), traj.boundary_flag)


def wave_operator(u_plus: Field, pot: PotentialOnGrid, T: float, cfg: EvolveConfig,
                  direction: int = 1, min_T: float = 10.0, return_trajectory: bool = False):
    """Approximate ``Omega_+ u_plus`` by solving backward from ``U(T) u_plus`` at time ``T``.

    ``direction=-1`` gives ``Omega_-`` through time reflection,
    ``Omega_-(v) = conj(Omega_+(conj v))``.  Only ``cfg.dt`` and the
    diagnostics settings of ``cfg`` are used.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if T < min_T:
        raise ValueError(f"T={T} is below the minimum {min_T}")
    if direction == -1:
        out = wave_operator(Field(u_plus.grid, np.conj(u_plus.values), 0.0), pot, T, cfg, 1, min_T,
                            return_trajectory)
        if return_trajectory:
            f, tr = out
            return Field(f.grid, np.conj(f.values), 0.0), tr
        return Field(out.grid, np.conj(out.values), 0.0)
    start = free_propagate(Field(u_plus.grid, u_plus.values, 0.0), T)
    run = replace(cfg, t_start=T, t_end=0.0, sample_stride=10**9)
    tr = strang_evolve(start, pot, run)
    if tr.boundary_flag:
        warnings.warn(f"backward run reached the box boundary (fraction {tr.max_boundary_fraction:.2e})",
                      RuntimeWarning, stacklevel=2)
    out = Field(u_plus.grid, tr.final.values, 0.0)
    return (out, tr) if return_trajectory else out


@dataclass
class RichardsonPoint:
    T: float
    discrepancy: float
    energy_gap: float


def richardson_series(u_plus: Field, pot: PotentialOnGrid, Ts: Sequence[float], cfg: EvolveConfig,
                      known: dict | None = None, min_T: float = 5.0) -> list[RichardsonPoint]:
    """``||Omega_T u - Omega_2T u||_{H^1}`` (relative) for each ``T``.

    ``known`` maps horizons to already computed reconstructions.
    """
    cache = dict(known or {})

    def omega(T):
        if T not in cache:
            cache[T] = wave_operator(u_plus, pot, T, cfg, min_T=min_T)
        return cache[T]

    pts = []
    for T in Ts:
        a, b = omega(T), omega(2 * T)
        pts.append(RichardsonPoint(float(T), relative_h1(a, b), abs(energy(a, pot) - energy(b, pot))))
    return pts


@dataclass
class RoundTripReport:
    u0: Field
    u0_reconstructed: Field
    u_plus: Field
    T: float
    relative_h1_error: float
    richardson: list
    richardson_decreasing: bool
    discrepancy: float
    residuals: dict
    energy_budget: float
    energy_within_budget: bool
    repulsive: Optional[bool]
    boundary_fraction: float
    passed: bool
    thresholds: dict = field(default_factory=dict)


def completeness_roundtrip(u0: Field, pot: PotentialOnGrid, T: float, cfg: EvolveConfig,
                           richardson_T: Sequence[float] | None = None, h1_tol: float = 1e-3,
                           mass_tol: float = 1e-10, alpha: float = 2.0, a: float = 1.0,
                           min_T: float = 5.0) -> RoundTripReport:
    """Forward to ``T``, take ``u_+ = U(-T) u(T)``, rebuild ``u0`` as ``Omega_T u_+``.

    The truncation in ``T`` is estimated by the ``(T', 2T')`` discrepancies
    of the wave operator applied to ``u_+`` for ``T'`` in ``richardson_T``
    (default ``T/4, T/2, T``), which should decrease.  The energy residual
    ``|(1/2)||grad u_+||^2 - E(u0)|`` is checked against the budget
    ``E_gap(T) + max energy drift of the forward run``, where ``E_gap`` is
    the energy difference between the ``T`` and ``2T`` reconstructions.
    """
    repulsive = None
    if pot.profile is not None and not pot.is_zero:
        try:
            repulsive = check_H3(pot, alpha, a).passed
        except Exception:
            repulsive = None
        if repulsive is False:
            warnings.warn("potential is not repulsive; the completeness theory does not apply",
                          RuntimeWarning, stacklevel=2)
    fwd_cfg = replace(cfg, t_start=0.0, t_end=T, sample_stride=10**9)
    fwd = strang_evolve(Field(u0.grid, u0.values, 0.0), pot, fwd_cfg)
    u_plus_t = interaction_picture(fwd.final)
    u_plus = Field(u0.grid, u_plus_t.values, 0.0)
    back, back_tr = wave_operator(u_plus, pot, T, cfg, min_T=min_T, return_trajectory=True)
    err = relative_h1(back, u0)
    Ts = list(richardson_T) if richardson_T is not None else [T / 4, T / 2, T]
    rich = richardson_series(u_plus, pot, Ts, cfg, known={T: back}, min_T=min(min_T, min(Ts)))
    disc = [p.discrepancy for p in rich]
    dec = all(b < a_ for a_, b in zip(disc, disc[1:]))
    e0 = energy(u0, pot)
    drift = max(abs(r.energy - e0) for r in fwd.rows) if fwd.rows else 0.0
    res = {"mass": abs(math.sqrt(mass(u_plus)) - math.sqrt(mass(u0))) / max(math.sqrt(mass(u0)), 1e-300),
           "mass_reconstructed": abs(math.sqrt(mass(back)) - math.sqrt(mass(u0))) / max(math.sqrt(mass(u0)), 1e-300),
           "energy": abs(kinetic_energy(u_plus) - e0)}
    budget = rich[-1].energy_gap + drift if rich else drift
    e_ok = res["energy"] <= budget
    bfrac = max(fwd.max_boundary_fraction, back_tr.max_boundary_fraction)
    passed = err < h1_tol and dec and res["mass"] < mass_tol and e_ok
    return RoundTripReport(u0, back, u_plus, float(T), err, rich, bool(dec), disc[-1] if disc else math.nan,
                           res, budget, bool(e_ok), repulsive, bfrac, bool(passed),
                           {"h1": h1_tol, "mass": mass_tol})
