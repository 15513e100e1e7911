"""Periodic box discretization, spectral calculus and norm bookkeeping.

Grid points sit at ``x_j = -L + j*h`` for ``j = 0..N-1`` along every axis, so
the origin is the sample with index ``N//2``.  Fourier arrays use the
standard DFT order (``0..N/2-1, -N/2..-1``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft

_WORKERS = 1


def set_threads(k: int | None) -> None:
    """Number of worker threads used by every FFT in the package."""
    global _WORKERS
    _WORKERS = max(1, int(k)) if k else 1


def fftn(a):
    return sfft.fftn(a, workers=_WORKERS)


def ifftn(a):
    return sfft.ifftn(a, workers=_WORKERS)


def rfftn(a):
    return sfft.rfftn(a, workers=_WORKERS)


def irfftn(a, shape):
    return sfft.irfftn(a, s=shape, workers=_WORKERS)


@dataclass(frozen=True)
class GridSpec:
    """Periodic box ``[-L, L)^n`` with ``N`` points per axis."""

    n: int
    N: int
    L: float

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """1-D wavenumbers ``pi*j/L`` in DFT order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N) * (np.pi / self.L)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis."""
        return _broadcast_axes(self.axis, self.n)

    @cached_property
    def radius(self) -> np.ndarray:
        r2 = sum(x**2 for x in self.coords)
        return np.sqrt(np.broadcast_to(r2, self.shape))

    @cached_property
    def kvecs(self) -> tuple[np.ndarray, ...]:
        return _broadcast_axes(self.wavenumbers, self.n)

    @cached_property
    def kvecs_deriv(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers with the Nyquist mode zeroed, for first derivatives."""
        k = self.wavenumbers.copy()
        k[self.N // 2] = 0.0
        return _broadcast_axes(k, self.n)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.broadcast_to(sum(k**2 for k in self.kvecs), self.shape)

    @cached_property
    def k2_deriv(self) -> np.ndarray:
        return np.broadcast_to(sum(k**2 for k in self.kvecs_deriv), self.shape)

    @cached_property
    def rkvecs_deriv(self) -> tuple[np.ndarray, ...]:
        """Derivative wavenumbers for the half spectrum of ``rfftn``."""
        k = self.wavenumbers.copy()
        k[self.N // 2] = 0.0
        kl = np.arange(self.N // 2 + 1) * (np.pi / self.L)
        kl[-1] = 0.0
        return _broadcast_axes(k, self.n)[:-1] + (_broadcast_axes(kl, self.n)[-1],)

    @cached_property
    def rfft_shape(self) -> tuple[int, ...]:
        return self.shape[:-1] + (self.N // 2 + 1,)

    @cached_property
    def origin_index(self) -> tuple[int, ...]:
        return (self.N // 2,) * self.n

    @property
    def diagonal(self) -> float:
        return self.L * math.sqrt(self.n)

    @property
    def outside_theory(self) -> bool:
        """True for n < 3, where the scattering theory does not apply."""
        return self.n < 3


def _broadcast_axes(v: np.ndarray, n: int) -> tuple[np.ndarray, ...]:
    out = []
    for i in range(n):
        shape = [1] * n
        shape[i] = -1
        out.append(v.reshape(shape))
    return tuple(out)


def make_grid(n: int, N: int, L: float) -> GridSpec:
    if n not in (1, 2, 3):
        raise ValueError(f"unsupported dimension n={n}; expected 1, 2 or 3")
    if int(N) != N or N % 2 or N < 8:
        raise ValueError(f"points per axis must be even and >= 8, got N={N}")
    if not L > 0:
        raise ValueError(f"half length must be positive, got L={L}")
    return GridSpec(int(n), int(N), float(L))


@dataclass
class Field:
    """Complex samples on a grid, stamped with a physical time."""

    grid: GridSpec
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.size != self.grid.size:
            raise ValueError(f"field has {v.size} samples, grid needs {self.grid.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite samples")
        self.values = v
        self.t = float(self.t)

    def copy(self, values=None, t=None) -> "Field":
        return Field(self.grid, self.values.copy() if values is None else values,
                     self.t if t is None else t)

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values, self.t)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values, self.t)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.values * c, self.t)

    __rmul__ = __mul__

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2


def zeros(grid: GridSpec, t: float = 0.0) -> Field:
    return Field(grid, np.zeros(grid.shape, dtype=complex), t)


def _check_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, Field) else np.asarray(f)


def gradient_array(values: np.ndarray, grid: GridSpec, values_hat=None) -> list[np.ndarray]:
    """Spectral gradient of raw samples; complex output."""
    vh = fftn(values) if values_hat is None else values_hat
    return [ifftn(1j * k * vh) for k in grid.kvecs_deriv]


def spectral_gradient(f: Field) -> list[Field]:
    """Components of the gradient, each computed as ``i*k`` times the DFT.

    The Nyquist coefficient of every derivative is set to zero so that
    gradients of real fields stay real.
    """
    return [Field(f.grid, g, f.t) for g in gradient_array(f.values, f.grid)]


def lp_norm(f, r: float, grid: GridSpec | None = None) -> float:
    """Riemann-sum ``L^r`` norm; ``r = inf`` gives the largest modulus."""
    if r < 1:
        raise ValueError(f"L^r norm needs r >= 1, got r={r}")
    g = f.grid if isinstance(f, Field) else grid
    a = np.abs(_values(f))
    if math.isinf(r):
        return float(a.max()) if a.size else 0.0
    if r == 2:
        return float(np.sqrt(np.sum(a * a) * g.cell_volume))
    return float((np.sum(a**r) * g.cell_volume) ** (1.0 / r))


def gradient_l2(f: Field) -> float:
    """``||grad f||_2`` evaluated on the Fourier side (Parseval)."""
    vh = fftn(f.values)
    g = f.grid
    return float(np.sqrt(np.sum(g.k2_deriv * np.abs(vh) ** 2) * g.cell_volume / g.size))


def h1_norm(f: Field) -> float:
    """``||f||_2 + ||grad f||_2``."""
    return lp_norm(f, 2) + gradient_l2(f)


def fourier_l2(f: Field) -> float:
    vh = fftn(f.values)
    return float(np.sqrt(np.sum(np.abs(vh) ** 2) * f.grid.cell_volume / f.grid.size))


def spacetime_norm(traj, q: float, r: float, interval: tuple[float, float] | None = None) -> float:
    """``L^q(I, L^r)`` norm over the stored snapshots of a trajectory.

    Time quadrature is the trapezoidal rule over the snapshot times that fall
    inside ``interval`` (all of them by default).
    """
    if q < 1:
        raise ValueError(f"time exponent must be >= 1, got q={q}")
    times = np.asarray(traj.times)
    lo, hi = (times.min(), times.max()) if interval is None else (min(interval), max(interval))
    sel = [i for i, t in enumerate(times) if lo - 1e-12 <= t <= hi + 1e-12]
    if not sel:
        return 0.0
    vals = np.array([lp_norm(traj.fields[i], r) for i in sel])
    if math.isinf(q):
        return float(vals.max())
    ts = times[sel]
    order = np.argsort(ts)
    return float(np.trapezoid(vals[order] ** q, ts[order]) ** (1.0 / q))


def cube_labels(grid: GridSpec, edge: float) -> tuple[np.ndarray, int]:
    """Per-sample cube index for cubes of the given edge centred on ``i*edge``."""
    k = edge / grid.h
    ki = int(round(k))
    if ki < 1 or abs(k - ki) > 1e-9 * max(1.0, k):
        raise ValueError(f"cube edge {edge} is not a multiple of the spacing {grid.h}")
    d = np.arange(grid.N) - grid.N // 2
    lab1 = (d + ki // 2) // ki
    lab1 = lab1 - lab1.min()
    nc = int(lab1.max()) + 1
    lab = np.zeros(grid.shape, dtype=np.int64)
    for ax in _broadcast_axes(lab1, grid.n):
        lab = lab * nc + ax
    return lab, nc**grid.n


def cube_norm(f, m: float, r: float, edge: float, grid: GridSpec | None = None) -> float:
    """``l^m(L^r)`` norm: ``l^m`` aggregate of the ``L^r`` norms over cubes."""
    if m < 1 or r < 1:
        raise ValueError("cube_norm needs m, r >= 1")
    g = f.grid if isinstance(f, Field) else grid
    a = np.abs(_values(f)).ravel()
    lab, ncubes = cube_labels(g, edge)
    lab = lab.ravel()
    if math.isinf(r):
        per = np.zeros(ncubes)
        np.maximum.at(per, lab, a)
    else:
        per = np.bincount(lab, weights=a**r, minlength=ncubes) * g.cell_volume
        per = per ** (1.0 / r)
    if math.isinf(m):
        return float(per.max())
    return float(np.sum(per**m) ** (1.0 / m))


@dataclass(frozen=True)
class SobolevExponents:
    """Exponent bookkeeping for a Lebesgue exponent ``r`` in dimension ``n``."""

    n: int
    r: float
    delta: float = dc_field(init=False)
    conjugate: float = dc_field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", delta(self.n, self.r))
        object.__setattr__(self, "conjugate", conjugate(self.r))

    @property
    def two_star(self) -> float:
        return two_star(self.n)

    def admissible(self, q: float) -> bool:
        """``0 <= 2/q = delta(r) < 1`` (equality to 1e-12)."""
        two_over_q = 0.0 if math.isinf(q) else 2.0 / q
        return 0.0 <= self.delta < 1.0 and abs(two_over_q - self.delta) <= 1e-12

    def admissible_q(self) -> float:
        """The time exponent pairing with ``r``; inf when ``delta = 0``."""
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"r={self.r} has no admissible partner in n={self.n}")
        return math.inf if self.delta == 0 else 2.0 / self.delta


def delta(n: int, r: float) -> float:
    return n / 2.0 - (0.0 if math.isinf(r) else n / r)


def conjugate(r: float) -> float:
    if math.isinf(r):
        return 1.0
    if r == 1:
        return math.inf
    return r / (r - 1.0)


def two_star(n: int) -> float:
    if n < 3:
        raise ValueError(f"the Sobolev exponent 2n/(n-2) needs n >= 3, got n={n}")
    return 2.0 * n / (n - 2.0)


def exponents(n: int, r: float) -> SobolevExponents:
    if not (r >= 2):
        raise ValueError(f"exponent r must lie in [2, inf], got {r}")
    if n < 1:
        raise ValueError("dimension must be positive")
    return SobolevExponents(n, r)


def scattering_r0(n: int) -> float:
    """``2n/(n-1)``, the exponent with ``delta = 1/2`` used near infinity in time."""
    return 2.0 * n / (n - 1.0)


def local_delta0(n: int, p2: float) -> float:
    """``(n/(4 p2) - 1/2)_+`` for the finite-time Cauchy problem."""
    return max(n / (4.0 * p2) - 0.5, 0.0)


def boundary_mass_fraction(f: Field, width: int = 2) -> float:
    """Share of ``||f||_2^2`` within ``width`` cells of the box boundary."""
    g = f.grid
    rho = f.density
    total = rho.sum()
    if total == 0:
        return 0.0
    mask = np.zeros(g.shape, dtype=bool)
    for ax in range(g.n):
        idx = [slice(None)] * g.n
        idx[ax] = np.r_[0:width, g.N - width:g.N]
        mask[tuple(idx)] = True
    return float(rho[mask].sum() / total)


def as_fields(grid: GridSpec, arrays: Sequence[np.ndarray], t: float = 0.0) -> list[Field]:
    return [Field(grid, a, t) for a in arrays]
