"""Periodic phase-space grid, real fields on it, and the discrete Fourier convention.

The grid is the uniform lattice on ``[-Lx, Lx) x [-Lv, Lv)`` with ``Nx x Nv``
points; arrays are indexed ``[ix, iv]`` (x-major).

Transform convention: the forward DFT is unscaled and the inverse carries the
factor ``1/(Nx*Nv)`` (the numpy/scipy default).  Integer frequency ``n`` maps to
the physical wave number ``pi * n / L``.  With this convention the grid
Plancherel identity reads::

    hx*hv * sum |f|^2 == hx*hv / (Nx*Nv) * sum |fhat|^2
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhaseGrid:
    Lx: float
    Lv: float
    Nx: int
    Nv: int

    def __post_init__(self):
        for name in ("Nx", "Nv"):
            n = getattr(self, name)
            if int(n) != n or not _is_pow2(int(n)) or n < 8:
                raise ConfigurationError(f"{name}={n!r} must be a power of two >= 8")
        for name in ("Lx", "Lv"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ConfigurationError(f"{name}={val!r} must be a positive length")

    @property
    def hx(self) -> float:
        return 2.0 * self.Lx / self.Nx

    @property
    def hv(self) -> float:
        return 2.0 * self.Lv / self.Nv

    @property
    def cell(self) -> float:
        return self.hx * self.hv

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nx, self.Nv)

    @cached_property
    def x(self) -> np.ndarray:
        return -self.Lx + self.hx * np.arange(self.Nx)

    @cached_property
    def v(self) -> np.ndarray:
        return -self.Lv + self.hv * np.arange(self.Nv)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.v, indexing="ij")

    @cached_property
    def xi(self) -> np.ndarray:
        """Integer x-frequencies in FFT order."""
        return np.rint(sfft.fftfreq(self.Nx, 1.0 / self.Nx)).astype(int)

    @cached_property
    def eta(self) -> np.ndarray:
        """Integer v-frequencies in FFT order."""
        return np.rint(sfft.fftfreq(self.Nv, 1.0 / self.Nv)).astype(int)

    @cached_property
    def kx(self) -> np.ndarray:
        return np.pi * self.xi / self.Lx

    @cached_property
    def kv(self) -> np.ndarray:
        return np.pi * self.eta / self.Lv

    @cached_property
    def kx_half(self) -> np.ndarray:
        """Non-negative x wave numbers of the real transform along x."""
        return np.pi * np.arange(self.Nx // 2 + 1) / self.Lx

    @cached_property
    def kv_half(self) -> np.ndarray:
        """Non-negative v wave numbers of the real transform along v."""
        return np.pi * np.arange(self.Nv // 2 + 1) / self.Lv

    @cached_property
    def rspec_k(self) -> tuple[np.ndarray, np.ndarray]:
        """Wave-number meshes matching ``rfft2`` output (full x axis, half v axis)."""
        return np.meshgrid(self.kx, self.kv_half, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def sample(self, fn) -> "Field":
        """Evaluate ``fn(x, v)`` on the lattice."""
        X, V = self.mesh
        return Field(self, np.broadcast_to(np.asarray(fn(X, V), dtype=float), self.shape).copy())


def make_grid(Lx: float, Lv: float, Nx: int, Nv: int) -> PhaseGrid:
    return PhaseGrid(float(Lx), float(Lv), int(Nx), int(Nv))


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function of (x, v) on ``grid``."""

    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def integral(self) -> float:
        return float(self.grid.cell * self.values.sum())


@dataclass(frozen=True, eq=False)
class SpectralField:
    """DFT coefficients indexed by integer frequencies in FFT order."""

    grid: PhaseGrid
    coefficients: np.ndarray

    def __post_init__(self):
        if self.coefficients.shape != self.grid.shape:
            raise ValueError("coefficient shape does not match grid")

    def coefficient(self, xi: int, eta: int) -> complex:
        return complex(self.coefficients[xi % self.grid.Nx, eta % self.grid.Nv])

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        c = self.coefficients
        flipped = np.conj(np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1)))
        scale = max(np.abs(c).max(), 1e-300)
        return bool(np.abs(c - flipped).max() <= tol * scale)


def to_spectral(field: Field) -> SpectralField:
    return SpectralField(field.grid, sfft.fft2(field.values))


def from_spectral(sf: SpectralField) -> Field:
    return Field(sf.grid, sfft.ifft2(sf.coefficients).real)


def lp_values(values: np.ndarray, grid: PhaseGrid, p: float) -> np.ndarray:
    """L^p norm over the last two axes (batched)."""
    a = np.abs(values)
    if np.isinf(p):
        return a.max(axis=(-2, -1))
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return grid.cell * a.sum(axis=(-2, -1))
    if p == 2:
        return np.sqrt(grid.cell * np.einsum("...ij,...ij->...", a, a))
    return (grid.cell * (a**p).sum(axis=(-2, -1))) ** (1.0 / p)


def lp_norm(field: Field, p: float) -> float:
    """``(hx*hv*sum |f|^p)^(1/p)``, or the max modulus for ``p = inf``."""
    return float(lp_values(field.values, field.grid, p))


def inner(f, g, grid: PhaseGrid) -> np.ndarray:
    """Grid quadrature of ``f*g`` over the last two axes."""
    return grid.cell * np.einsum("...ij,...ij->...", f, g)


def boundary_mass_fraction(values: np.ndarray, grid: PhaseGrid) -> float:
    """Fraction of |f| mass lying in the outer half of the box (|x| > Lx/2 or |v| > Lv/2)."""
    X, V = grid.mesh
    outer = (np.abs(X) > 0.5 * grid.Lx) | (np.abs(V) > 0.5 * grid.Lv)
    a = np.abs(values)
    total = a.sum()
    if total == 0:
        return 0.0
    return float(a[..., outer].sum() / total)


def d_dv(values: np.ndarray, grid: PhaseGrid, order: int = 1) -> np.ndarray:
    """Spectral v-derivative along the last axis.  Odd orders drop the Nyquist mode."""
    F = sfft.rfft(values, axis=-1)
    ik = 1j * grid.kv_half
    if order % 2 == 1 and grid.Nv % 2 == 0:
        ik = ik.copy()
        ik[-1] = 0.0
    return sfft.irfft(F * ik**order, n=grid.Nv, axis=-1)


def d_dx(values: np.ndarray, grid: PhaseGrid, order: int = 1) -> np.ndarray:
    """Spectral x-derivative along axis -2.  Odd orders drop the Nyquist mode."""
    F = sfft.rfft(values, axis=-2)
    ik = 1j * grid.kx_half
    if order % 2 == 1:
        ik = ik.copy()
        ik[-1] = 0.0
    return sfft.irfft(F * (ik**order)[:, None], n=grid.Nx, axis=-2)


def translate(values: np.ndarray, grid: PhaseGrid, ax, av) -> np.ndarray:
    """Exact periodic translation ``f(x + ax, v + av)`` by Fourier phases.

    ``ax`` and ``av`` may be arrays broadcasting against the leading axes of
    ``values`` (one shift per path).
    """
    ax = np.asarray(ax, dtype=float)[..., None, None]
    av = np.asarray(av, dtype=float)[..., None, None]
    KX, KV = grid.rspec_k
    F = sfft.rfft2(values, axes=(-2, -1))
    phase = np.exp(1j * (KX * ax + KV * av))
    return sfft.irfft2(F * phase, s=grid.shape, axes=(-2, -1))
