"""Interaction potentials: sampling, convolution and hypothesis checks.

Potentials are radial, ``V(x) = v(|x|)``.  On the grid they are evaluated at
the periodic (minimal-image) distance; the origin cell, where a singular
kernel cannot be point-evaluated, carries the exact average of ``v`` over the
cubic cell.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn

from .grid import Field, GridSpec, fftn, irfftn, rfftn

Profile = Callable[[np.ndarray], np.ndarray]

KINDS = ("inverse_power", "tabulated_radial", "zero", "radial_function")


@dataclass
class PotentialSpec:
    """Description of a radial potential.

    ``inverse_power`` is ``C |x|^-gamma``; ``tabulated_radial`` interpolates
    ``(radii, values)`` monotonically and vanishes beyond the last radius;
    ``radial_function`` wraps a Python callable ``v(r)`` (optionally with its
    derivative).  ``r_min``/``r_max`` multiply by the indicator of
    ``r_min <= |x| <= r_max``.
    """

    kind: str = "zero"
    C: float = 1.0
    gamma: float = 1.0
    radii: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    profile: Optional[Profile] = None
    dprofile: Optional[Profile] = None
    r_min: Optional[float] = None
    r_max: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "inverse_power":
            if not self.gamma > 0:
                raise ValueError(f"inverse_power needs gamma > 0, got {self.gamma}")
            if self.C == 0:
                raise ValueError("inverse_power needs a nonzero constant C")
        if self.kind == "tabulated_radial":
            r = np.asarray(self.radii, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or r.size < 2:
                raise ValueError("tabulated_radial needs matching 1-D radii/values (>= 2 samples)")
            if np.any(np.diff(r) <= 0) or r[0] < 0:
                raise ValueError("tabulated radii must be nonnegative and strictly increasing")
            self.radii, self.values = r, v
        if self.kind == "radial_function" and self.profile is None:
            raise ValueError("radial_function needs a profile callable")

    @property
    def truncated(self) -> bool:
        return self.r_min is not None or self.r_max is not None


def inverse_power(C: float = 1.0, gamma: float = 1.0, **kw) -> PotentialSpec:
    return PotentialSpec("inverse_power", C=C, gamma=gamma, **kw)


def tabulated(radii, values, **kw) -> PotentialSpec:
    return PotentialSpec("tabulated_radial", radii=radii, values=values, **kw)


def load_tabulated(path, **kw) -> PotentialSpec:
    """Two-column text file ``radius value``."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns (radius, value), got {data.shape[1]}")
    return tabulated(data[:, 0], data[:, 1], **kw)


def radial_function(profile: Profile, dprofile: Profile | None = None, **kw) -> PotentialSpec:
    return PotentialSpec("radial_function", profile=profile, dprofile=dprofile, **kw)


def zero_potential() -> PotentialSpec:
    return PotentialSpec("zero")


def radial_profile(spec: PotentialSpec) -> tuple[Profile, Profile]:
    """``(v, v')`` as vectorized callables of ``r > 0``."""
    if spec.kind == "zero":
        def v(r):
            return np.zeros_like(np.asarray(r, dtype=float))
        dv = v
    elif spec.kind == "inverse_power":
        C, g = spec.C, spec.gamma

        def v(r):
            return C * np.asarray(r, dtype=float) ** (-g)

        def dv(r):
            return -g * C * np.asarray(r, dtype=float) ** (-g - 1.0)
    elif spec.kind == "tabulated_radial":
        interp = PchipInterpolator(spec.radii, spec.values, extrapolate=False)
        dinterp = interp.derivative()
        r0, v0, r_end = spec.radii[0], spec.values[0], spec.radii[-1]

        def v(r):
            r = np.asarray(r, dtype=float)
            out = np.nan_to_num(interp(np.clip(r, r0, None)), nan=0.0)
            return np.where(r < r0, v0, np.where(r > r_end, 0.0, out))

        def dv(r):
            r = np.asarray(r, dtype=float)
            out = np.nan_to_num(dinterp(np.clip(r, r0, None)), nan=0.0)
            return np.where((r < r0) | (r > r_end), 0.0, out)
    else:
        v = spec.profile
        dv = spec.dprofile if spec.dprofile is not None else _numeric_derivative(spec.profile)

    if not spec.truncated:
        return v, dv
    lo = spec.r_min if spec.r_min is not None else 0.0
    hi = spec.r_max if spec.r_max is not None else math.inf

    def vt(r):
        r = np.asarray(r, dtype=float)
        return np.where((r >= lo) & (r <= hi), v(r), 0.0)

    def dvt(r):
        r = np.asarray(r, dtype=float)
        return np.where((r >= lo) & (r <= hi), dv(r), 0.0)

    return vt, dvt


def has_exact_derivative(spec: PotentialSpec | None) -> bool:
    """True when ``radial_profile(spec)[1]`` is a closed form rather than a finite difference."""
    if spec is None:
        return False
    return spec.kind in ("zero", "inverse_power", "tabulated_radial") or spec.dprofile is not None


def _numeric_derivative(v: Profile) -> Profile:
    def dv(r):
        r = np.asarray(r, dtype=float)
        e = 1e-6 * np.maximum(r, 1e-8)
        return (v(r + e) - v(r - e)) / (2 * e)
    return dv


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in ``R^n`` (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


# -- origin cell --------------------------------------------------------------
#
# For a radial integrand the cube [-h/2, h/2]^n is swept by rays from the
# centre; the ray through the face point (h/2, s) has length rho = |(h/2, s)|
# and solid-angle element (h/2) rho^-n ds.  Hence
#   int_cube v = 2n * int_face (h/2) rho^-n F(rho) ds,  F(rho) = int_0^rho r^(n-1) v dr.

def _face_integral(n: int, half: float, radial: Callable[[np.ndarray], np.ndarray], order: int = 24) -> float:
    """``radial`` maps an array of ray lengths to ``F(rho)``."""
    x, w = np.polynomial.legendre.leggauss(order)
    s = 0.5 * half * (x + 1.0)
    ws = 0.5 * half * w
    mesh = np.meshgrid(*([s] * (n - 1)), indexing="ij")
    wmesh = np.prod(np.meshgrid(*([ws] * (n - 1)), indexing="ij"), axis=0)
    rho = np.sqrt(half**2 + sum(m**2 for m in mesh))
    F = radial(rho)
    # 2^(n-1) symmetric copies of the positive face quadrant, 2n faces
    return 2.0 * n * 2.0 ** (n - 1) * float(np.sum(wmesh * half * rho ** (-n) * F))


@lru_cache(maxsize=64)
def unit_cell_power_average(n: int, gamma: float) -> float:
    """Average of ``|x|^-gamma`` over the unit cube centred at the origin."""
    if gamma >= n:
        raise ValueError(f"|x|^-{gamma} is not integrable at the origin in n={n}")
    if n == 1:
        return 2.0 * 0.5 ** (1.0 - gamma) / (1.0 - gamma)

    def face(*s):
        rho = math.sqrt(0.25 + sum(x * x for x in s))
        return 0.5 * rho ** (-gamma) / (n - gamma)

    if n == 2:
        val, _ = integrate.quad(face, 0.0, 0.5, epsabs=1e-14, epsrel=1e-13)
    else:
        val, _ = integrate.dblquad(lambda y, x: face(x, y), 0.0, 0.5, 0.0, 0.5,
                                   epsabs=1e-14, epsrel=1e-13)
    return 2.0 * n * 2.0 ** (n - 1) * val


def cell_average(v: Profile, n: int, h: float, points=None) -> float:
    """Average of a radial profile over the grid cell ``[-h/2, h/2]^n``.

    ``points`` lists radii where ``v`` jumps.  ``F(rho)`` is accumulated over
    the sorted ray lengths so only the first piece touches the origin.
    """
    def piece(lo, hi):
        inner = [p for p in (points if points is not None else ()) if lo < p < hi]
        val, _ = integrate.quad(lambda r: r ** (n - 1) * float(v(r)), lo, hi, limit=200,
                                epsabs=0.0, epsrel=1e-12, points=inner or None)
        return val

    def F(rho):
        rho = np.asarray(rho, dtype=float)
        flat = rho.ravel()
        order = np.argsort(flat)
        out = np.empty_like(flat)
        acc, prev = 0.0, 0.0
        for i in order:
            if flat[i] > prev:
                acc += piece(prev, flat[i])
                prev = flat[i]
            out[i] = acc
        return out.reshape(rho.shape)

    if n == 1:
        return 2.0 * float(F(np.array([h / 2]))[0]) / h
    return _face_integral(n, h / 2, F) / h**n


def origin_cell_value(spec: PotentialSpec, n: int, h: float) -> float:
    if spec.kind == "zero":
        return 0.0
    half_diag = 0.5 * h * math.sqrt(n)
    if spec.kind == "inverse_power":
        if spec.gamma >= n:
            raise ValueError(f"gamma={spec.gamma} >= n={n}: the origin cell average diverges")
        inside = (spec.r_min is None or spec.r_min <= 0) and (spec.r_max is None or spec.r_max >= half_diag)
        if inside:
            return spec.C * h ** (-spec.gamma) * unit_cell_power_average(n, spec.gamma)
    v, _ = radial_profile(spec)
    pts = [p for p in (spec.r_min, spec.r_max) if p]
    if spec.kind == "tabulated_radial":
        pts += [spec.radii[0], spec.radii[-1]]
    return cell_average(v, n, h, pts)


# -- sampled potential ----------------------------------------------------------

@dataclass
class PotentialOnGrid:
    """Samples of ``V`` on a grid together with its convolution multiplier.

    ``multiplier`` is the DFT of the samples (origin moved to index 0) times
    ``h^n``, so multiplying by it implements the periodic Riemann-sum
    convolution.  ``zero_mode="drop"`` removes the ``k = 0`` coefficient,
    i.e. replaces ``V`` by ``V`` minus its box mean.
    """

    grid: GridSpec
    samples: np.ndarray
    multiplier: np.ndarray
    origin_value: float
    origin_policy: str = "cell_average"
    spec: Optional[PotentialSpec] = None
    profile: Optional[Profile] = None
    dprofile: Optional[Profile] = None
    zero_mode: str = "keep"
    _mult_half: np.ndarray = field(default=None, repr=False)
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        K = np.fft.ifftshift(self.samples)
        self._mult_half = rfftn(K).real * self.grid.cell_volume
        if self.zero_mode == "drop":
            self._mult_half[(0,) * self.grid.n] = 0.0
        elif self.zero_mode != "keep":
            raise ValueError(f"zero_mode must be 'keep' or 'drop', got {self.zero_mode!r}")

    @property
    def is_zero(self) -> bool:
        return not np.any(self._mult_half)

    @property
    def mult_half(self) -> np.ndarray:
        return self._mult_half


def sample_potential(spec: PotentialSpec, grid: GridSpec, zero_mode: str = "keep") -> PotentialOnGrid:
    v, dv = radial_profile(spec)
    r = grid.radius
    samples = np.zeros(grid.shape)
    if spec.kind != "zero":
        if spec.kind == "inverse_power" and spec.gamma >= grid.n:
            raise ValueError(f"gamma={spec.gamma} >= n={grid.n}: the origin cell average diverges")
        nz = r > 0
        samples[nz] = v(r[nz])
        samples[grid.origin_index] = origin_cell_value(spec, grid.n, grid.h)
    if not np.all(np.isfinite(samples)):
        raise ValueError("potential samples are not finite")
    return _build(grid, samples, spec=spec, profile=v, dprofile=dv, zero_mode=zero_mode)


def _build(grid, samples, spec=None, profile=None, dprofile=None, zero_mode="keep",
           policy="cell_average") -> PotentialOnGrid:
    samples = np.asarray(samples, dtype=float).reshape(grid.shape)
    mult = fftn(np.fft.ifftshift(samples)) * grid.cell_volume
    if zero_mode == "drop":
        mult[(0,) * grid.n] = 0.0
    return PotentialOnGrid(grid, samples, mult, float(samples[grid.origin_index]), policy,
                           spec, profile, dprofile, zero_mode)


def from_samples(grid: GridSpec, samples, zero_mode: str = "keep") -> PotentialOnGrid:
    """Wrap raw real samples (centred layout) as a potential."""
    return _build(grid, samples, zero_mode=zero_mode, policy="raw")


def delta_kernel(grid: GridSpec) -> PotentialOnGrid:
    """``1/h^n`` at the origin: convolution acts as the identity."""
    s = np.zeros(grid.shape)
    s[grid.origin_index] = 1.0 / grid.cell_volume
    return from_samples(grid, s)


def constant_kernel(grid: GridSpec, c: float) -> PotentialOnGrid:
    return from_samples(grid, np.full(grid.shape, float(c)))


def convolve_array(pot: PotentialOnGrid, rho: np.ndarray) -> np.ndarray:
    """``V * rho`` for a real array (no checks)."""
    return irfftn(rfftn(rho) * pot.mult_half, pot.grid.shape)


def convolve_density(pot: PotentialOnGrid, rho, check_sign: bool = True) -> Field:
    """Periodic Riemann-sum convolution ``V * rho``; real in, real out."""
    if isinstance(rho, Field):
        if rho.grid != pot.grid:
            raise ValueError(f"grid mismatch: {rho.grid} vs {pot.grid}")
        vals, t = rho.values, rho.t
    else:
        vals, t = np.asarray(rho), 0.0
        if vals.size != pot.grid.size:
            raise ValueError("density does not match the potential's grid")
        vals = vals.reshape(pot.grid.shape)
    if np.iscomplexobj(vals):
        scale = np.abs(vals).max() if vals.size else 0.0
        if scale and np.abs(vals.imag).max() > 1e-10 * scale:
            raise ValueError("convolve_density expects a real density")
        vals = vals.real
    if check_sign and vals.size and vals.min() < -1e-12 * max(np.abs(vals).max(), 1e-300):
        warnings.warn("density has negative entries", RuntimeWarning, stacklevel=2)
    return Field(pot.grid, convolve_array(pot, vals), t)


# -- radial quadrature -------------------------------------------------------------

def radial_lp_norm(v: Profile, n: int, p: float, lo: float, hi: float,
                   points: Optional[np.ndarray] = None) -> float:
    """``L^p`` norm of ``v(|x|)`` over the shell ``lo <= |x| <= hi``.

    Integrates in ``s = log r`` so that many decades of radius are cheap.
    ``p = inf`` samples the shell densely.
    """
    if hi <= lo:
        return 0.0
    if math.isinf(p):
        rs = np.geomspace(max(lo, 1e-300), hi, 4001) if lo > 0 else np.geomspace(hi * 1e-12, hi, 4001)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.abs(v(rs))
        return float(np.nanmax(vals))
    a, b = math.log(lo), math.log(hi)
    brk = None
    if points is not None:
        pts = np.asarray(points, dtype=float)
        pts = pts[(pts > lo) & (pts < hi)]
        if pts.size:
            brk = np.unique(np.log(pts))

    def f(s):
        r = math.exp(s)
        with np.errstate(over="ignore"):
            return r**n * abs(float(v(r))) ** p

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if brk is not None and brk.size > 50:
            edges = np.concatenate([[a], brk, [b]])
            val = sum(integrate.quad(f, x0, x1, limit=100)[0] for x0, x1 in zip(edges[:-1], edges[1:]))
        else:
            val, _ = integrate.quad(f, a, b, limit=400, points=brk)
    total = sphere_area(n) * val
    return float(total ** (1.0 / p)) if np.isfinite(total) else math.inf


@dataclass
class NormProbe:
    """A radial norm with its refinement-based divergence verdict."""

    value: float
    refined: float
    finite: bool
    grid_value: float


def _tail_slope(v, n, p, r) -> float:
    """Log-log slope of the radial integrand ``r^n |v(r)|^p`` between ``r`` and ``2r``.

    ``nan`` when the integrand vanishes there (compactly supported tails).
    """
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if math.isinf(p):
            f1, f2 = abs(float(v(r))), abs(float(v(2 * r)))
        else:
            f1 = r**n * abs(float(v(r))) ** p
            f2 = (2 * r) ** n * abs(float(v(2 * r))) ** p
        if f1 == 0 and f2 == 0:
            return math.nan
        return math.log2(f2 / f1) if f1 > 0 else math.inf


def _near_finite(v, n, p, eps) -> bool:
    # integrable at the origin iff r^n |v|^p still decays toward r -> 0
    s = _tail_slope(v, n, p, eps / 2)
    if math.isinf(p):
        return math.isnan(s) or s >= -_SLOPE_TOL
    return math.isnan(s) or s > _SLOPE_TOL


def _far_finite(v, n, p, R) -> bool:
    s = _tail_slope(v, n, p, R)
    if math.isinf(p):
        return math.isnan(s) or s <= _SLOPE_TOL
    return math.isnan(s) or s < -_SLOPE_TOL


_SLOPE_TOL = 1e-9


def _probe_near(v, n, p, a, eps, grid_value, points=None) -> NormProbe:
    finite = _near_finite(v, n, p, eps)
    i1 = radial_lp_norm(v, n, p, eps, a, points)
    i2 = radial_lp_norm(v, n, p, eps / 2, a, points)
    return NormProbe(i1, i2, bool(finite and np.isfinite(i2)), grid_value)


def _probe_far(v, n, p, a, R, grid_value, points=None) -> NormProbe:
    finite = _far_finite(v, n, p, R)
    i1 = radial_lp_norm(v, n, p, a, R, points)
    i2 = radial_lp_norm(v, n, p, a, 2 * R, points)
    return NormProbe(i1, i2, bool(finite and np.isfinite(i2)), grid_value)


def _grid_norm(pot: PotentialOnGrid, values, mask, p) -> float:
    vals = np.abs(values[mask])
    if vals.size == 0:
        return 0.0
    if math.isinf(p):
        return float(vals.max())
    return float((np.sum(vals**p) * pot.grid.cell_volume) ** (1.0 / p))


def _breakpoints(pot: PotentialOnGrid):
    s = pot.spec
    if s is None:
        return None
    pts = [x for x in (s.r_min, s.r_max) if x]
    if s.kind == "tabulated_radial":
        pts.extend(s.radii.tolist())
    return np.array(pts) if pts else None


# -- hypothesis checks -----------------------------------------------------------------

WINDOWS = ("cauchy", "global", "wave_operators", "decay", "completeness")


def exponent_windows(n: int, p1: float, p2: float) -> dict:
    """Which exponent windows the pair ``(p1, p2)`` satisfies.

    ``cauchy``: ``1 v n/4 <= p2 <= p1 <= inf``; ``global``: additionally
    ``p2 > n/4``; ``wave_operators``: global and ``p1 <= n/2``; ``decay``:
    ``1 v n/4 < p2`` and ``p1 < n``; ``completeness``: ``p1 < n/2`` on top of
    ``decay``.
    """
    base = max(1.0, n / 4.0) <= p2 <= p1
    sub = p2 > n / 4.0
    strict = p2 > max(1.0, n / 4.0)
    return {
        "cauchy": bool(base),
        "global": bool(base and sub),
        "wave_operators": bool(base and sub and p1 <= n / 2.0),
        "decay": bool(base and strict and p1 < n),
        "completeness": bool(base and strict and p1 < n / 2.0),
        "p2_gt_n_over_4": bool(sub),
        "p1_lt_n_over_2": bool(p1 < n / 2.0),
        "p1_lt_n": bool(p1 < n),
    }


@dataclass
class H1Report:
    p1: float
    p2: float
    a: float
    near_norm: float
    far_norm: float
    near_finite: bool
    far_finite: bool
    near_grid_norm: float
    far_grid_norm: float
    windows: dict
    theorem: str
    passed: bool


@dataclass
class H2Report:
    near_norm: float
    far_norm: float
    near_finite: bool
    far_finite: bool
    nonnegative: bool
    passed: bool


@dataclass
class H3Report:
    monotone: bool
    alpha: float
    a: float
    best_A: float
    radial: bool
    max_increase: float
    passed: bool


@dataclass
class AssumptionReport:
    h1: H1Report
    h2: H2Report
    h3: Optional[H3Report]
    notes: list = field(default_factory=list)


def _refinement_scales(pot: PotentialOnGrid, depth: int) -> tuple[float, float]:
    return pot.grid.h * 2.0 ** (-depth), pot.grid.L * 2.0 ** depth


def check_H1(pot: PotentialOnGrid, p1: float, p2: float, a: float = 1.0,
             theorem: str = "cauchy", depth: int = 30) -> H1Report:
    """Split ``V`` at radius ``a`` and test the pieces in ``L^p2`` and ``L^p1``.

    A radial norm is declared infinite when the log-log slope of the radial
    integrand ``r^n |v|^p`` fails to decay toward the origin (near part) or
    toward infinity (far part), measured ``depth`` dyadic steps beyond the
    grid; the truncated norms are reported alongside.
    """
    if p2 > p1:
        raise ValueError(f"need p2 <= p1, got p1={p1}, p2={p2}")
    if p2 < 1:
        raise ValueError(f"need p2 >= 1, got {p2}")
    if theorem not in WINDOWS:
        raise ValueError(f"unknown theorem window {theorem!r}; expected one of {WINDOWS}")
    g = pot.grid
    r = g.radius
    near_g = _grid_norm(pot, pot.samples, r <= a, p2)
    far_g = _grid_norm(pot, pot.samples, r >= a, p1)
    if pot.profile is None:
        near = NormProbe(near_g, near_g, True, near_g)
        far = NormProbe(far_g, far_g, True, far_g)
    else:
        eps, R = _refinement_scales(pot, depth)
        pts = _breakpoints(pot)
        near = _probe_near(pot.profile, g.n, p2, a, eps, near_g, points=pts)
        far = _probe_far(pot.profile, g.n, p1, a, R, far_g, points=pts)
    win = exponent_windows(g.n, p1, p2)
    passed = near.finite and far.finite and win[theorem]
    return H1Report(p1, p2, a, near.value, far.value, near.finite, far.finite,
                    near_g, far_g, win, theorem, bool(passed))


def check_H2(pot: PotentialOnGrid, a: float = 1.0, depth: int = 30) -> H2Report:
    """Negative part ``max(-V, 0)`` split at ``a``: near in ``L^{n/2}``, far in ``L^inf``."""
    g = pot.grid
    neg = np.maximum(-pot.samples, 0.0)
    if pot.profile is not None:
        rs = np.geomspace(g.h * 1e-6, g.L * 1e3, 20001)
        nonneg = bool(np.all(pot.profile(rs) >= 0)) and not np.any(neg > 0)
    else:
        nonneg = not np.any(neg > 0)
    if nonneg:
        return H2Report(0.0, 0.0, True, True, True, True)
    p_near = g.n / 2.0
    near_g = _grid_norm(pot, neg, g.radius <= a, p_near)
    far_g = _grid_norm(pot, neg, g.radius >= a, math.inf)
    if pot.profile is None:
        near = NormProbe(near_g, near_g, True, near_g)
        far_val, far_fin = far_g, True
    else:
        vneg = _negative_part(pot.profile)
        eps, R = _refinement_scales(pot, depth)
        near = _probe_near(vneg, g.n, p_near, a, eps, near_g, points=_breakpoints(pot))
        rs = np.geomspace(a, R, 4001)
        far_val = float(np.max(vneg(rs)))
        far_fin = bool(np.isfinite(far_val) and vneg(2 * R) <= 1.05 * max(far_val, 1e-300))
    return H2Report(near.value, far_val, near.finite, far_fin, False, bool(near.finite and far_fin))


def _negative_part(v: Profile) -> Profile:
    def vn(r):
        return np.maximum(-np.asarray(v(r), dtype=float), 0.0)
    return vn


def _radial_table(pot: PotentialOnGrid, tol: float) -> tuple[np.ndarray, np.ndarray, bool, float]:
    """Distinct sample radii (origin excluded), mean value, radial flag, spread."""
    r = pot.grid.radius.ravel()
    s = pot.samples.ravel()
    key = np.round(r / pot.grid.h, 9)
    uniq, inv = np.unique(key, return_inverse=True)
    lo = np.full(uniq.size, np.inf)
    hi = np.full(uniq.size, -np.inf)
    np.minimum.at(lo, inv, s)
    np.maximum.at(hi, inv, s)
    mean = np.bincount(inv, weights=s) / np.bincount(inv)
    spread = float(np.max(hi - lo))
    scale = max(float(np.abs(s).max()), 1e-300)
    keep = uniq > 0
    return uniq[keep] * pot.grid.h, mean[keep], spread <= tol * scale, spread


def check_H3(pot: PotentialOnGrid, alpha: float, a: float, tol: float = 1e-12,
             radial_tol: float = 1e-10, samples: int = 4000) -> H3Report:
    """Monotonicity of ``v`` and the best constant in the power-law decrease.

    ``best_A`` is the infimum over radius pairs ``0 < r1 < r2 <= a`` of
    ``alpha (v(r1) - v(r2)) / (r2^alpha - r1^alpha)``.  With a closed-form
    derivative this is the infimum of ``-v'(r) / r^(alpha-1)`` on a dense
    radius set.  Otherwise adjacent sampled pairs are used (every pair ratio
    is a mediant of adjacent ones), skipping pairs whose difference is below
    rounding resolution.
    """
    if alpha < 2:
        raise ValueError(f"the repulsivity test uses alpha >= 2, got {alpha}")
    if not a > 0:
        raise ValueError("a must be positive")
    tab_r, tab_v, radial, spread = _radial_table(pot, radial_tol)
    if not radial:
        raise ValueError(f"potential samples are not radial (spread {spread:.3e})")
    exact = False
    if pot.profile is not None:
        rs = np.union1d(np.geomspace(a * 1e-8, a, samples), np.linspace(a / samples, a, samples))
        outer = np.geomspace(a, max(a, pot.grid.diagonal), samples)
        vs = np.asarray(pot.profile(rs), dtype=float)
        vo = np.asarray(pot.profile(outer), dtype=float)
        increases = np.concatenate([np.diff(vs), np.diff(vo)])
        exact = pot.dprofile is not None and has_exact_derivative(pot.spec)
    else:
        rs, vs = tab_r[tab_r <= a], tab_v[tab_r <= a]
        increases = np.diff(tab_v)
    scale = max(float(np.nanmax(np.abs(vs))) if vs.size else 0.0, 1e-300)
    max_inc = float(np.max(increases)) if increases.size else 0.0
    monotone = bool(max_inc <= 1e-12 * scale) and bool(np.all(np.isfinite(vs)))
    if not monotone or rs.size < 2:
        best = 0.0
    elif exact:
        # inf of the pair ratios = inf of -v'(r) / r^(alpha-1) (each ratio is a weighted mean of it)
        best = float(max(np.min(-np.asarray(pot.dprofile(rs), dtype=float) / rs ** (alpha - 1)), 0.0))
    else:
        num = alpha * (vs[:-1] - vs[1:])
        den = rs[1:] ** alpha - rs[:-1] ** alpha
        # pairs whose difference is lost to rounding carry no information
        ok = np.abs(vs[:-1] - vs[1:]) > 1e-6 * scale
        best = float(max(np.min(num[ok] / den[ok]), 0.0)) if np.any(ok) else 0.0
    return H3Report(monotone, alpha, a, best, radial, max_inc, bool(monotone and best > tol))


def check_assumptions(pot: PotentialOnGrid, p1: float, p2: float, alpha: float = 2.0,
                      a: float = 1.0, theorem: str = "completeness") -> AssumptionReport:
    notes = []
    if pot.grid.outside_theory:
        notes.append(f"dimension n={pot.grid.n} < 3 lies outside the scattering theory")
    h1 = check_H1(pot, p1, p2, a, theorem=theorem)
    h2 = check_H2(pot, a)
    try:
        h3 = check_H3(pot, alpha, a)
    except ValueError as exc:
        h3 = None
        notes.append(str(exc))
    return AssumptionReport(h1, h2, h3, notes)


def default_p_grid(n: int = 3) -> np.ndarray:
    """Exponents in ``[1, 2n]`` plus ``inf``, refined on both sides of the window edges."""
    off = np.geomspace(1e-4, 0.05, 30)
    edges = [e for e in (1.0, n / 4.0, n / 2.0, float(n)) if e >= 1.0]
    fine = np.concatenate([np.concatenate([e - off, e + off]) for e in edges])
    pts = np.concatenate([np.linspace(1.0, 2.0 * n, 201), fine, [np.inf]])
    return np.unique(pts[pts >= 1.0])


def admissible_pairs(pot: PotentialOnGrid, a: float = 1.0, p_grid=None, depth: int = 30) -> dict:
    """Finiteness of the near/far parts over a grid of exponents.

    Returns ``{"p": p_grid, "near": bool array, "far": bool array}``.
    """
    if p_grid is None:
        p_grid = default_p_grid(pot.grid.n)
    p_grid = np.asarray(p_grid, dtype=float)
    eps, R = _refinement_scales(pot, depth)
    near = np.array([_near_finite(pot.profile, pot.grid.n, p, eps) for p in p_grid])
    far = np.array([_far_finite(pot.profile, pot.grid.n, p, R) for p in p_grid])
    return {"p": p_grid, "near": near, "far": far}


def satisfied_windows(pot: PotentialOnGrid, a: float = 1.0, p_grid=None) -> dict:
    """For each theorem window, whether some ``(p1, p2)`` with finite parts fits it."""
    tab = admissible_pairs(pot, a, p_grid)
    p, near, far = tab["p"], tab["near"], tab["far"]
    out = {w: False for w in WINDOWS}
    witness = {}
    for i2, p2 in enumerate(p):
        if not near[i2]:
            continue
        for i1, p1 in enumerate(p):
            if p1 < p2 or not far[i1]:
                continue
            for w, ok in exponent_windows(pot.grid.n, p1, p2).items():
                if w in out and ok and not out[w]:
                    out[w] = True
                    witness[w] = (float(p1), float(p2))
    return {"windows": out, "witness": witness}


def gamma_windows(n: int, gammas, grid: GridSpec | None = None, a: float = 1.0,
                  p_grid=None) -> dict:
    """``{window: (min gamma, max gamma) or None}`` for ``|x|^-gamma`` over the sampled ``gammas``."""
    if grid is None:
        grid = GridSpec(n, 8, 4.0)
    hits: dict = {w: [] for w in WINDOWS}
    for g in gammas:
        spec = inverse_power(1.0, g)
        # sampling is irrelevant here; only the radial profile is probed
        pot = PotentialOnGrid(grid, np.zeros(grid.shape), np.zeros(grid.shape, complex), 0.0,
                              spec=spec, profile=radial_profile(spec)[0])
        for w, ok in satisfied_windows(pot, a, p_grid)["windows"].items():
            if ok:
                hits[w].append(g)
    return {w: (float(min(v)), float(max(v))) if v else None for w, v in hits.items()}


def gamma_window(n: int, theorem: str, gammas, grid: GridSpec | None = None,
                 a: float = 1.0, p_grid=None) -> tuple[float, float] | None:
    """Range of ``gamma`` for which ``|x|^-gamma`` fits the given window."""
    if theorem not in WINDOWS:
        raise ValueError(f"unknown window {theorem!r}")
    return gamma_windows(n, gammas, grid, a, p_grid)[theorem]


# -- angular regularization ------------------------------------------------------------

def bump(rho):
    """``exp(-1/(1 - rho^2))`` on the unit ball, zero outside."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    inside = rho < 1
    out[inside] = np.exp(-1.0 / (1.0 - rho[inside] ** 2))
    return out


@lru_cache(maxsize=32)
def mollifier_nodes(n: int, order: int = 8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Product Gauss rule for ``int phi(z) g(z) dz`` over the unit ball.

    Returns ``(radius, cos_angle, weight)`` of nodes for integrands that
    depend on ``z`` only through ``|z|`` and its angle to a fixed axis; the
    weights are normalized to unit mass.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    rho = 0.5 * (x + 1.0)
    wr = 0.5 * w * rho ** (n - 1) * bump(rho)
    if n == 1:
        rad = np.concatenate([rho, rho])
        mu = np.concatenate([np.ones(order), -np.ones(order)])
        wt = np.concatenate([wr, wr])
    else:
        if n == 2:
            th = 0.5 * np.pi * (x + 1.0)
            mu1, wmu = np.cos(th), 0.5 * np.pi * w
        else:
            mu1, wmu = x, w * (1.0 - x**2) ** ((n - 3) / 2.0)
        R, M = np.meshgrid(rho, mu1, indexing="ij")
        W = np.outer(wr, wmu)
        rad, mu, wt = R.ravel(), M.ravel(), W.ravel()
    wt = wt / wt.sum()
    return rad, mu, wt


def regularization_factors(n: int, j: float, order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Scale factors ``|e - z/j|`` and weights such that ``v_j(r) = sum w v(r s)``."""
    if j < 2:
        raise ValueError(f"regularization index must be >= 2, got j={j}")
    rad, mu, wt = mollifier_nodes(n, order)
    s = np.sqrt(1.0 - 2.0 * rad * mu / j + (rad / j) ** 2)
    return s, wt


def regularized_spec(spec: PotentialSpec, j: float, n: int, quadrature_order: int = 8) -> PotentialSpec:
    """Radial profile of ``V_j(x) = int V(x - |x| z / j) phi(z) dz``."""
    s, w = regularization_factors(n, j, quadrature_order)
    v, dv = radial_profile(spec)

    def vj(r):
        r = np.asarray(r, dtype=float)
        return np.tensordot(w, v(np.multiply.outer(s, r)), axes=1)

    def dvj(r):
        r = np.asarray(r, dtype=float)
        return np.tensordot(w * s, dv(np.multiply.outer(s, r)), axes=1)

    if not has_exact_derivative(spec):
        dvj = None
    name = f"{spec.name or spec.kind}_j{j:g}"
    if spec.kind == "inverse_power" and not spec.truncated:
        # scale invariance keeps the power law; only the constant changes
        return inverse_power(spec.C * float(np.dot(w, s ** (-spec.gamma))), spec.gamma, name=name)
    return radial_function(vj, dvj, name=name)


def regularize(spec: PotentialSpec, j: float, grid: GridSpec, quadrature_order: int = 8,
               zero_mode: str = "keep") -> PotentialOnGrid:
    return sample_potential(regularized_spec(spec, j, grid.n, quadrature_order), grid, zero_mode)


def regularization_breakpoints(spec: PotentialSpec, j: float, n: int, order: int = 8) -> np.ndarray:
    """Radii where the regularized profile of a truncated potential has jumps."""
    s, _ = regularization_factors(n, j, order)
    pts = [x for x in (spec.r_min, spec.r_max) if x]
    return np.unique(np.concatenate([np.array(pts) / si for si in s])) if pts else np.array([])
