"""Functionals of the solution: conserved quantities, dilation and Morawetz
terms, the internal/external split, propagation and decay diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import (Field, GridSpec, boundary_mass_fraction, cube_norm, fftn, ifftn,
                   irfftn, lp_norm, rfftn, two_star)
from .potential import PotentialOnGrid, convolve_array


# -- conserved quantities -------------------------------------------------------

def mass(u: Field) -> float:
    """``||u||_2^2``."""
    return float(np.sum(u.density) * u.grid.cell_volume)


def _kinetic_from_hat(vh: np.ndarray, grid: GridSpec) -> float:
    # full |k|^2 symbol, the one the free flow uses, so the discrete energy is conserved
    return 0.5 * float(np.sum(grid.k2 * (vh.real**2 + vh.imag**2))) * grid.cell_volume / grid.size


def kinetic_energy(u: Field) -> float:
    """``(1/2) ||grad u||_2^2``."""
    return _kinetic_from_hat(fftn(u.values), u.grid)


def _check_pair(u: Field, pot: PotentialOnGrid) -> None:
    if u.grid != pot.grid:
        raise ValueError(f"grid mismatch: field on {u.grid}, potential on {pot.grid}")


def _hartree_from_rho(rho: np.ndarray, pot: PotentialOnGrid) -> float:
    if pot.is_zero:
        return 0.0
    return 0.5 * float(np.sum(rho * convolve_array(pot, rho))) * pot.grid.cell_volume


def hartree_term(u: Field, pot: PotentialOnGrid) -> float:
    """``P(u) = (1/2) <rho, V * rho>``."""
    _check_pair(u, pot)
    return _hartree_from_rho(u.density, pot)


def energy(u: Field, pot: PotentialOnGrid) -> float:
    _check_pair(u, pot)
    return kinetic_energy(u) + hartree_term(u, pot)


# -- dilation and Morawetz terms --------------------------------------------------------

def radial_weights(grid: GridSpec, sigma: float) -> tuple[np.ndarray, ...]:
    """Components of ``x / (|x|^2 + sigma^2)^(1/2)``; at ``sigma = 0`` the origin gets 0."""
    key = ("radial_weights", sigma)
    cache = _grid_cache(grid)
    if key not in cache:
        r = grid.radius
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / np.sqrt(r**2 + sigma**2)
        inv[~np.isfinite(inv)] = 0.0
        cache[key] = tuple(np.broadcast_to(x, grid.shape) * inv for x in grid.coords)
    return cache[key]


_GRID_CACHES: dict = {}


def _grid_cache(grid: GridSpec) -> dict:
    return _GRID_CACHES.setdefault(grid, {})


def _dilation_from(values: np.ndarray, vh: np.ndarray, grid: GridSpec, sigma: float) -> float:
    w = radial_weights(grid, sigma)
    total = 0.0
    for wi, k in zip(w, grid.kvecs_deriv):
        du = ifftn(1j * k * vh)
        total += float(np.sum(np.conj(values) * wi * du).imag)
    return total * grid.cell_volume


def dilation_quantity(u: Field, sigma: float | None = None) -> float:
    """``Im <u, grad h . grad u>`` with ``h = (|x|^2 + sigma^2)^(1/2)``.

    ``sigma`` defaults to one grid spacing.
    """
    sigma = u.grid.h if sigma is None else float(sigma)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    return _dilation_from(u.values, fftn(u.values), u.grid, sigma)


def _kernel_gradient_multipliers(pot: PotentialOnGrid) -> list[np.ndarray]:
    """DFT of the sampled analytic kernel gradient ``v'(|z|) z/|z|`` (origin 0)."""
    key = "kernel_gradient"
    if key not in pot.cache:
        if pot.dprofile is None:
            raise ValueError("kernel-gradient route needs a potential with a radial derivative")
        g = pot.grid
        r = g.radius
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(r > 0, pot.dprofile(np.where(r > 0, r, 1.0)) / np.where(r > 0, r, 1.0), 0.0)
        mults = []
        for x in g.coords:
            G = np.broadcast_to(x, g.shape) * radial
            mults.append(fftn(np.fft.ifftshift(G)) * g.cell_volume)
        pot.cache[key] = mults
    return pot.cache[key]


def morawetz_integrand(u: Field, pot: PotentialOnGrid, sigma: float = 0.0,
                       method: str = "spectral") -> float:
    """``-int rho(x) xhat . (V * grad rho)(x) dx`` at fixed time.

    ``method="spectral"`` differentiates ``rho`` spectrally and convolves with
    ``V``; ``method="kernel"`` convolves ``rho`` with the sampled analytic
    gradient of ``V`` instead.  ``sigma > 0`` replaces ``xhat`` by
    ``x/(|x|^2 + sigma^2)^(1/2)``.
    """
    _check_pair(u, pot)
    g = u.grid
    if pot.is_zero:
        return 0.0
    rho = u.density
    w = radial_weights(g, sigma)
    total = 0.0
    if method == "spectral":
        rh = rfftn(rho) * pot.mult_half
        for wi, k in zip(w, g.rkvecs_deriv):
            total += float(np.sum(rho * wi * irfftn(1j * k * rh, g.shape)))
    elif method == "kernel":
        rh = fftn(rho)
        for wi, m in zip(w, _kernel_gradient_multipliers(pot)):
            total += float(np.sum(rho * wi * ifftn(m * rh).real))
    else:
        raise ValueError(f"unknown method {method!r}")
    return -total * g.cell_volume


# -- internal / external split ------------------------------------------------------------

def split_radius(t: float, grid: GridSpec) -> tuple[float, bool]:
    """``|t| log|t|`` clamped to ``[h, box diagonal]``; flag tells whether it was clamped."""
    ta = abs(t)
    raw = ta * math.log(ta) if ta > 1 else 0.0
    R = min(max(raw, grid.h), grid.diagonal)
    return R, R != raw


@dataclass
class SplitResult:
    inner: Field
    outer: Field
    radius: float
    clamped: bool


def split_field(u: Field, t: float | None = None, t_min: float = math.e) -> SplitResult:
    """Sharp split of ``u`` at ``|x| = t log t`` into internal and external parts."""
    t = u.t if t is None else float(t)
    if abs(t) < t_min:
        raise ValueError(f"split needs |t| >= {t_min}, got t={t}")
    R, clamped = split_radius(t, u.grid)
    inside = u.grid.radius <= R
    inner = np.where(inside, u.values, 0)
    return SplitResult(Field(u.grid, inner, u.t), Field(u.grid, u.values - inner, u.t), R, clamped)


def cube_edge(grid: GridSpec, a: float) -> tuple[float, float]:
    """Cube edge ``a (2n)^(-1/2)`` rounded down to a grid multiple (at least ``h``)."""
    want = a / math.sqrt(2 * grid.n)
    k = max(1, int(math.floor(want / grid.h + 1e-9)))
    return k * grid.h, want


# -- diagnostics rows ----------------------------------------------------------------------

CSV_COLUMNS = ("t", "mass", "kinetic", "hartree", "energy", "dilation",
               "norm4", "norm6", "internal_mass", "external_mass")


@dataclass
class DiagnosticsRow:
    t: float
    mass: float
    kinetic: float
    hartree: float
    energy: float
    dilation: float
    norms: dict
    internal_mass: float
    external_mass: float
    internal_cube_norm: float
    split_radius: float
    boundary_fraction: float

    def csv_values(self) -> list[float]:
        return [self.t, self.mass, self.kinetic, self.hartree, self.energy, self.dilation,
                self.norms.get(4.0, math.nan), self.norms.get(6.0, math.nan),
                self.internal_mass, self.external_mass]


def diagnostics_row(values: np.ndarray, pot: PotentialOnGrid, t: float, *,
                    r_list: Sequence[float] = (4.0, 6.0), sigma: float | None = None,
                    alpha: float = 2.0, a: float = 1.0, values_hat=None) -> DiagnosticsRow:
    g = pot.grid
    vh = fftn(values) if values_hat is None else values_hat
    rho = values.real**2 + values.imag**2
    dv = g.cell_volume
    m = float(rho.sum()) * dv
    kin = _kinetic_from_hat(vh, g)
    pe = _hartree_from_rho(rho, pot)
    dil = _dilation_from(values, vh, g, g.h if sigma is None else sigma)
    absu = np.sqrt(rho)
    norms = {float(r): lp_norm(absu, r, g) for r in r_list}
    R, _ = split_radius(t, g)
    inside = g.radius <= R
    m_in = float(rho[inside].sum()) * dv
    edge, _ = cube_edge(g, a)
    cn = cube_norm(np.where(inside, absu, 0.0), alpha + 4.0, 2.0, edge, g)
    fr = boundary_mass_fraction(Field(g, values, t)) if m > 0 else 0.0
    return DiagnosticsRow(float(t), m, kin, pe, kin + pe, dil, norms, m_in, m - m_in, cn, R, fr)


def rows_table(rows: Sequence[DiagnosticsRow]) -> dict:
    """Columns of a diagnostics list as arrays."""
    out = {c: np.array([getattr(r, c) for r in rows]) for c in
           ("t", "mass", "kinetic", "hartree", "energy", "dilation", "internal_mass",
            "external_mass", "internal_cube_norm", "split_radius", "boundary_fraction")}
    if rows:
        for k in rows[0].norms:
            out[f"norm{k:g}"] = np.array([r.norms[k] for r in rows])
    return out


# -- Morawetz check ---------------------------------------------------------------------------

@dataclass
class MorawetzReport:
    t1: float
    t2: float
    lhs: float
    rhs_boundary: float
    rhs_bound: float
    internal_bound_lhs: Optional[float]
    monotonicity_violations: int
    min_integrand: float
    scale: float
    tolerance: float
    dilation_sigma_trend: dict
    boundary_fraction: float
    integrand_nonnegative: bool
    lhs_le_boundary: bool
    boundary_le_bound: bool
    passed: bool
    times: list = field(default_factory=list)
    integrand: list = field(default_factory=list)
    lhs_sharp: float = math.nan


def _snapshots_in(traj, t1, t2, tol=1e-9):
    idx = [i for i, t in enumerate(traj.times) if t1 - tol <= t <= t2 + tol]
    return sorted(idx, key=lambda i: traj.times[i])


def _rows_in(traj, t1, t2, tol=1e-9):
    return [r for r in traj.rows if t1 - tol <= r.t <= t2 + tol]


def morawetz_check(traj, pot: PotentialOnGrid, t1: float, t2: float, sigma: float | None = None,
                   tol_abs: float = 1e-6, quad_rel: float = 1e-3, integrand_tol: float = 1e-8,
                   monotone_tol: float = 1e-6) -> MorawetzReport:
    """Time integral of the Morawetz integrand against the dilation boundary terms.

    The integrand uses the same weight ``x/(|x|^2 + sigma^2)^(1/2)`` as the
    dilation, so the discrete identity behind the inequality is consistent;
    the unsmoothed (``sigma = 0``) integral is reported as ``lhs_sharp``.
    Passes when the integrand is nonnegative, its time integral stays below
    ``D(t2) - D(t1)`` and that difference stays below
    ``2 ||u||_2 sup ||grad u||_2``, all up to ``tol_abs * scale`` plus a
    relative allowance ``quad_rel`` on the time integral, and the stored
    dilation samples never decrease by more than ``monotone_tol * scale``.
    """
    if not t2 > t1:
        raise ValueError(f"need t1 < t2, got [{t1}, {t2}]")
    idx = _snapshots_in(traj, t1, t2)
    if len(idx) < 8:
        raise ValueError(f"only {len(idx)} snapshots in [{t1}, {t2}]; need at least 8")
    g = pot.grid
    sigma = g.h if sigma is None else sigma
    times = np.array([traj.times[i] for i in idx])
    fields = [traj.fields[i] for i in idx]
    J = np.array([morawetz_integrand(f, pot, sigma) for f in fields])
    lhs = float(np.trapezoid(J, times))
    lhs_sharp = float(np.trapezoid([morawetz_integrand(f, pot) for f in fields], times)) if sigma > 0 else lhs
    d1, d2 = dilation_quantity(fields[0], sigma), dilation_quantity(fields[-1], sigma)
    rows = _rows_in(traj, times[0], times[-1])
    norm_u = math.sqrt(mass(fields[0]))
    grads = [math.sqrt(2 * r.kinetic) for r in rows] or [math.sqrt(2 * kinetic_energy(f)) for f in fields]
    sup_grad = max(grads)
    scale = max(norm_u * sup_grad, 1e-300)
    bound = 2 * norm_u * sup_grad
    tol = tol_abs * scale + quad_rel * abs(lhs)
    jscale = max(float(np.abs(J).max()), scale)
    min_j = float(J.min())
    dil = np.array([r.dilation for r in rows]) if rows else np.array([d1, d2])
    violations = int(np.sum(np.diff(dil) < -monotone_tol * scale))
    trend = {f"{s:g}": dilation_quantity(fields[-1], s) for s in (2 * g.h, g.h, g.h / 2)}
    bfrac = max([r.boundary_fraction for r in rows] or [boundary_mass_fraction(f) for f in fields])
    internal = None
    if times[-1] > 1:
        internal = internal_norm_integral(traj, 2.0, 1.0, t1=max(1.0, t1), t2=t2)
    ok_j = min_j >= -integrand_tol * jscale
    ok_1 = lhs <= (d2 - d1) + tol
    ok_2 = (d2 - d1) <= bound + tol
    return MorawetzReport(float(times[0]), float(times[-1]), lhs, d2 - d1, bound, internal, violations,
                          min_j, scale, tol, trend, float(bfrac), bool(ok_j), bool(ok_1), bool(ok_2),
                          bool(ok_j and ok_1 and ok_2 and violations == 0),
                          times.tolist(), J.tolist(), lhs_sharp)


# -- propagation estimate ------------------------------------------------------------------------

@dataclass
class PropagationReport:
    R: float
    times: list
    lhs: list
    rhs: list
    slope: float
    passed: bool


def propagation_check(u0: Field, traj, R: float, tol: float = 1e-10) -> PropagationReport:
    """Mass outside radius ``R`` against the weighted initial mass plus linear growth."""
    if not 0 < R <= u0.grid.diagonal:
        raise ValueError(f"radius R={R} must lie inside the box")
    g = u0.grid
    r = g.radius
    weight = np.minimum(1.0, r / R)
    base = float(np.sum(weight * u0.density)) * g.cell_volume
    norm_u = math.sqrt(mass(u0))
    grads = [math.sqrt(2 * row.kinetic) for row in traj.rows] or \
            [math.sqrt(2 * kinetic_energy(f)) for f in traj.fields]
    slope = norm_u * max(grads) / R
    outside = r >= R
    lhs, rhs = [], []
    for t, f in zip(traj.times, traj.fields):
        lhs.append(float(np.sum(f.density[outside])) * g.cell_volume)
        rhs.append(base + abs(t - u0.t) * slope)
    scale = max(mass(u0), 1e-300)
    passed = all(l <= rr + tol * scale for l, rr in zip(lhs, rhs))
    return PropagationReport(R, list(traj.times), lhs, rhs, slope, bool(passed))


# -- internal norm and window search ----------------------------------------------------------------

def _internal_series(traj, alpha: float, a: float, t1: float, t2: float):
    cfg = getattr(traj, "config", None)
    use_rows = (cfg is not None and traj.rows and getattr(cfg, "alpha", None) == alpha
                and getattr(cfg, "a", None) == a)
    if use_rows:
        rows = _rows_in(traj, t1, t2)
        t = np.array([r.t for r in rows])
        v = np.array([r.internal_cube_norm for r in rows])
    else:
        idx = _snapshots_in(traj, t1, t2)
        g = traj.fields[0].grid
        edge, _ = cube_edge(g, a)
        t = np.array([traj.times[i] for i in idx])
        v = []
        for i in idx:
            f = traj.fields[i]
            R, _ = split_radius(f.t, g)
            v.append(cube_norm(np.where(g.radius <= R, f.values, 0), alpha + 4.0, 2.0, edge, g))
        v = np.array(v)
    order = np.argsort(t)
    return t[order], v[order] ** (alpha + 4.0)


def internal_norm_integral(traj, alpha: float, a: float, t1: float = 1.0,
                           t2: float | None = None) -> float:
    """``int (t log t + a)^-1 ||u_<(t); l^(alpha+4)(L^2)||^(alpha+4) dt``."""
    if t1 < 1:
        raise ValueError("the internal-norm integral starts at t >= 1")
    t2 = max(traj.times) if t2 is None else t2
    t, v = _internal_series(traj, alpha, a, t1, t2)
    if t.size < 2:
        return 0.0
    return float(np.trapezoid(v / (t * np.log(t) + a), t))


@dataclass
class WindowSearchResult:
    t2: Optional[float]
    window_integrals: list
    window_ends: list
    first_hit: Optional[int]
    M_measured: float
    t2_bound: float
    within_bound: Optional[bool]
    rhs_shape: Optional[float]
    ratio_to_rhs_shape: Optional[float]


def _window_integral(t, v, lo, hi):
    inner = (t > lo) & (t < hi)
    ts = np.concatenate([[lo], t[inner], [hi]])
    vs = np.concatenate([[np.interp(lo, t, v)], v[inner], [np.interp(hi, t, v)]])
    return float(np.trapezoid(vs, ts))


def window_search(traj, eps: float, ell: float, alpha: float, a: float = 1.0, t1: float = 1.0,
                  A_alpha: float | None = None) -> WindowSearchResult:
    """First window ``[t1 + (j-1) ell, t1 + j ell]`` whose internal-norm integral is ``<= eps``.

    ``M_measured`` is the weighted integral over the whole simulated range,
    which is what the window bound needs; with ``A_alpha`` the ratio to
    ``A^-1 ||u||_2 sqrt(E) (sqrt(E) + ||u||_2)^alpha`` is reported too.
    """
    if t1 < 1:
        raise ValueError("window search starts at t1 >= 1")
    if ell < a:
        raise ValueError(f"window length must be >= a, got {ell} < {a}")
    t_end = max(traj.times)
    if t_end - t1 < ell - 1e-12:
        raise ValueError(f"trajectory covers [{t1}, {t_end}], shorter than the window {ell}")
    t, v = _internal_series(traj, alpha, a, t1, t_end)
    K, ends, hit = [], [], None
    j = 1
    while t1 + j * ell <= t_end + 1e-9:
        lo, hi = t1 + (j - 1) * ell, t1 + j * ell
        K.append(_window_integral(t, v, lo, hi))
        ends.append(hi)
        if hit is None and K[-1] <= eps:
            hit = j
            break
        j += 1
    M = float(np.trapezoid(v / (t * np.log(t) + a), t)) if t.size > 1 else 0.0
    with np.errstate(over="ignore"):
        expo = (1 + math.log(t1 + ell)) * math.exp(min(M * ell / eps, 700.0)) - 1 if eps > 0 else math.inf
        bound = math.exp(min(expo, 700.0)) if expo < 700 else math.inf
    t2 = t1 + hit * ell if hit else None
    shape = ratio = None
    if A_alpha:
        norm_u = math.sqrt(traj.rows[0].mass) if traj.rows else math.sqrt(mass(traj.fields[0]))
        E = traj.rows[0].energy if traj.rows else None
        if E is not None and E > 0:
            shape = norm_u * math.sqrt(E) * (math.sqrt(E) + norm_u) ** alpha / A_alpha
            ratio = M / shape
    return WindowSearchResult(t2, K, ends, hit, M, bound, None if t2 is None else bool(t2 <= bound),
                              shape, ratio)


# -- decay ---------------------------------------------------------------------------------------

@dataclass
class DecayReport:
    r: float
    times: list
    norms: list
    window: tuple
    slope: float
    decreasing: bool


def decay_scan(traj, r: float, min_horizon: float = 5.0) -> DecayReport:
    """``||u(t)||_r`` and its log-log slope over the final dyadic window."""
    g = traj.fields[0].grid
    upper = two_star(g.n) if g.n >= 3 else math.inf
    if not 2 < r <= upper:
        raise ValueError(f"decay scan needs 2 < r <= {upper}, got r={r}")
    t_end = max(traj.times)
    if t_end < min_horizon:
        raise ValueError(f"trajectory must reach t >= {min_horizon}, ends at {t_end}")
    if traj.rows and float(r) in traj.rows[0].norms:
        ts = np.array([row.t for row in traj.rows])
        ns = np.array([row.norms[float(r)] for row in traj.rows])
    else:
        ts = np.array(traj.times)
        ns = np.array([lp_norm(f, r) for f in traj.fields])
    order = np.argsort(ts)
    ts, ns = ts[order], ns[order]
    sel = (ts >= t_end / 2) & (ts > 0)
    slope = float(np.polyfit(np.log(ts[sel]), np.log(ns[sel]), 1)[0])
    dec = bool(np.all(np.diff(ns[sel]) <= 1e-12 * ns[sel].max()))
    return DecayReport(float(r), ts.tolist(), ns.tolist(), (t_end / 2, t_end), slope, dec)
