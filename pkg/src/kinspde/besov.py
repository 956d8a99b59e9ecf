"""Anisotropic Littlewood-Paley blocks, Besov norms and Hölder-exponent estimators.

Frequencies are measured with the anisotropic modulus
``|k|_theta = |kx|^(1/theta_x) + |kv|^(1/theta_v)`` on physical wave numbers.  Under the
anisotropic dilation ``(kx, kv) -> (2^-3 kx, 2^-1 kv)`` the modulus halves, so every
dyadic symbol is a radial profile of the modulus:

    phi_0 = psi(r),   phi_j = psi(2^-j r) - psi(2^-(j-1) r),   sum_{j<=J} phi_j = psi(2^-J r).

``psi`` equals 1 on ``[0, 1]`` and 0 on ``[2, inf)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from scipy import stats

from .errors import ConfigurationError, DomainError
from .grid import Field, PhaseGrid, d_dv, d_dx, lp_values


@dataclass(frozen=True)
class AnisotropyWeights:
    theta: tuple[float, float] = (3.0, 1.0)

    def __post_init__(self):
        if len(self.theta) != 2 or min(self.theta) < 1:
            raise ConfigurationError(f"anisotropy weights must be a pair >= 1, got {self.theta}")

    def modulus(self, kx, kv):
        return np.abs(kx) ** (1.0 / self.theta[0]) + np.abs(kv) ** (1.0 / self.theta[1])


KINETIC = AnisotropyWeights((3.0, 1.0))


def _flat(s):
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_profile(r):
    """C-infinity step: 1 on ``r <= 1``, 0 on ``r >= 2``, monotone in between."""
    r = np.asarray(r, dtype=float)
    a = _flat(2.0 - r)
    b = _flat(r - 1.0)
    return a / (a + b)


def bump_profile(r):
    """``exp(1 - 1/(1 - (r-1)^2))`` on ``(1, 2)``; only C^1 at ``r = 1``, kept for comparison."""
    r = np.asarray(r, dtype=float)
    out = np.where(r <= 1.0, 1.0, 0.0)
    mid = (r > 1.0) & (r < 2.0)
    s = r[mid] - 1.0
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - s**2))
    return out


PROFILES = {"smooth": smooth_profile, "bump": bump_profile}


def nyquist_radius(grid: PhaseGrid, theta: AnisotropyWeights = KINETIC) -> float:
    """Largest modulus ball contained in the grid's frequency box."""
    return min((np.pi / grid.hx) ** (1.0 / theta.theta[0]), (np.pi / grid.hv) ** (1.0 / theta.theta[1]))


def max_level(grid: PhaseGrid, theta: AnisotropyWeights = KINETIC, strict: bool = True) -> int:
    """Largest admissible block index.

    Strict: the whole support ball ``B_{2^(J+1)}`` fits inside the frequency box.
    Otherwise: the top annulus still meets the lattice (blocks may be truncated in one
    direction, which is harmless for fields band-limited in that direction).
    """
    if strict:
        return int(np.floor(np.log2(nyquist_radius(grid, theta)) + 1e-9)) - 1
    KX, KV = grid.rspec_k
    rmax = float(theta.modulus(KX, KV).max())
    return int(np.ceil(np.log2(rmax))) if rmax > 0 else 0


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    grid: PhaseGrid
    theta: AnisotropyWeights
    J: int
    profile: str = "smooth"
    symbols: np.ndarray = field(repr=False, default=None)

    @cached_property
    def modulus(self) -> np.ndarray:
        KX, KV = self.grid.rspec_k
        return self.theta.modulus(KX, KV)

    def symbol_at(self, j: int, kx, kv):
        """``phi_j`` evaluated off the lattice at physical wave numbers."""
        psi = PROFILES[self.profile]
        r = self.theta.modulus(np.asarray(kx, float), np.asarray(kv, float))
        if j == 0:
            return psi(r)
        return psi(r / 2.0**j) - psi(r / 2.0 ** (j - 1))


def build_partition(grid: PhaseGrid, theta: AnisotropyWeights = KINETIC, J: int | None = None,
                    profile: str = "smooth", strict: bool = True) -> DyadicPartition:
    cap = max_level(grid, theta, strict)
    if J is None:
        J = cap
    if J < 0 or J > cap:
        raise ConfigurationError(
            f"J={J} not admissible for this grid (cap {cap}, strict={strict}); "
            f"anisotropic Nyquist radius {nyquist_radius(grid, theta):.4g}"
        )
    if profile not in PROFILES:
        raise ConfigurationError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    psi = PROFILES[profile]
    KX, KV = grid.rspec_k
    r = theta.modulus(KX, KV)
    cum = [psi(r / 2.0**j) for j in range(J + 1)]
    sym = np.empty((J + 1,) + r.shape)
    sym[0] = cum[0]
    for j in range(1, J + 1):
        sym[j] = cum[j] - cum[j - 1]
    # the smooth profile is monotone, so rounding can only leave tiny negatives
    np.clip(sym, 0.0, 1.0, out=sym)
    sym.setflags(write=False)
    return DyadicPartition(grid, theta, J, profile, sym)


def block_values(values: np.ndarray, j: int, partition: DyadicPartition) -> np.ndarray:
    """``R_j`` applied over the last two axes."""
    if not 0 <= j <= partition.J:
        raise DomainError(f"block index {j} outside 0..{partition.J}")
    g = partition.grid
    F = sfft.rfft2(values, axes=(-2, -1))
    return sfft.irfft2(F * partition.symbols[j], s=g.shape, axes=(-2, -1))


def block(field: Field, j: int, partition: DyadicPartition) -> Field:
    return Field(field.grid, block_values(field.values, j, partition))


def all_blocks(values: np.ndarray, partition: DyadicPartition) -> np.ndarray:
    """Stack of ``R_j f`` for ``j = 0..J`` along a new leading axis."""
    g = partition.grid
    F = sfft.rfft2(values, axes=(-2, -1))
    sym = partition.symbols.reshape((partition.J + 1,) + (1,) * (np.ndim(values) - 2) + F.shape[-2:])
    return sfft.irfft2(F[None] * sym, s=g.shape, axes=(-2, -1))


def reconstruct(values: np.ndarray, partition: DyadicPartition) -> np.ndarray:
    return all_blocks(values, partition).sum(axis=0)


def block_norms(values: np.ndarray, partition: DyadicPartition, p: float,
                sequence: bool = False) -> np.ndarray:
    """``||R_j f||_p`` for every ``j``.

    With ``sequence=True`` the leading axis of ``values`` indexes the components of an
    l^2-valued field and the pointwise l^2 norm is taken before the L^p norm.
    """
    B = all_blocks(values, partition)
    if sequence:
        B = np.sqrt(np.einsum("jk...,jk...->j...", B, B))
    return lp_values(B, partition.grid, p)


@dataclass(frozen=True)
class BesovSpec:
    s: float
    p: float
    theta: AnisotropyWeights = KINETIC
    J: int = 1

    def __post_init__(self):
        if self.J < 1:
            raise ConfigurationError("BesovSpec needs J >= 1")
        if not (self.p >= 1):
            raise ConfigurationError("p must be in [1, inf]")


def besov_norm(field: Field, spec: BesovSpec, partition: DyadicPartition) -> float:
    """``max_{j<=J} 2^(s j) ||R_j f||_p``."""
    if spec.J != partition.J:
        raise ConfigurationError(f"spec J={spec.J} does not match partition J={partition.J}")
    norms = block_norms(field.values, partition, spec.p)
    return float(np.max(2.0 ** (spec.s * np.arange(partition.J + 1)) * norms))


def _min_image(d: np.ndarray, L: float) -> np.ndarray:
    return (d + L) % (2.0 * L) - L


def cutoff(grid: PhaseGrid, center: tuple[float, float], delta: float,
           theta: AnisotropyWeights = KINETIC) -> np.ndarray:
    """Smooth ``chi((z - z0)/delta)``: 1 on the anisotropic ball of radius 1, 0 outside radius 2.

    Built from the smooth gauge ``rho = (|x|^(q/th1) + |v|^(q/th2))^(1/q)`` with
    ``q = 2 th1 th2``, which satisfies ``rho <= |z|_theta <= 2^(1-1/q) rho``.
    """
    if delta <= 0:
        raise DomainError("cutoff radius must be positive")
    t1, t2 = theta.theta
    q = 2.0 * t1 * t2
    X, V = grid.mesh
    dx = _min_image(X - center[0], grid.Lx) / delta
    dv = _min_image(V - center[1], grid.Lv) / delta
    rho = (np.abs(dx) ** (q / t1) + np.abs(dv) ** (q / t2)) ** (1.0 / q)
    return smooth_profile(1.0 + (rho - 1.0) / (2.0 ** (1.0 / q) - 1.0))


def localized_besov_norm(field: Field, spec: BesovSpec, partition: DyadicPartition, delta: float,
                         centers: Sequence[tuple[float, float]]) -> float:
    """``sup_{z0} ||chi^delta_{z0} f||_B`` over the given centres."""
    centers = list(centers)
    if not centers:
        raise DomainError("localized Besov norm needs at least one centre")
    best = 0.0
    for c in centers:
        chi = cutoff(field.grid, c, delta, spec.theta)
        best = max(best, besov_norm(Field(field.grid, chi * field.values), spec, partition))
    return best


def finite_difference(values: np.ndarray, shift: tuple[int, int], order: int) -> np.ndarray:
    """``delta^(M)_h f`` with ``h`` an integer lattice shift (periodic)."""
    out = np.array(values, dtype=float, copy=True)
    for _ in range(order):
        out = np.roll(out, (-shift[0], -shift[1]), axis=(-2, -1)) - out
    return out


def difference_offsets(grid: PhaseGrid, mixed: bool = True) -> list[tuple[int, int]]:
    """Dyadic lattice shifts ``2^-k L`` along each axis, ``k = 2..log2(N)-2``, plus mixed pairs."""
    def axis_shifts(n):
        kmax = int(np.log2(n)) - 2
        return [n >> (k + 1) for k in range(2, kmax + 1)]

    sx, sv = axis_shifts(grid.Nx), axis_shifts(grid.Nv)
    offs = [(m, 0) for m in sx] + [(0, n) for n in sv]
    if mixed:
        offs += [(m, n) for m in sx for n in sv]
    return offs


def difference_norm(field: Field, s: float, p: float, M: int | None = None,
                    theta: AnisotropyWeights = KINETIC,
                    offsets: Sequence[tuple[int, int]] | None = None) -> float:
    """``sup_h |h|_theta^-s ||delta^(M)_h f||_p + ||f||_p`` over a finite dyadic offset set."""
    if s <= 0:
        raise DomainError("difference norm needs s > 0")
    if M is None:
        M = int(np.floor(s)) + 1
    g = field.grid
    offsets = difference_offsets(g) if offsets is None else offsets
    best = 0.0
    for m, n in offsets:
        h = theta.modulus(m * g.hx, n * g.hv)
        inc = lp_values(finite_difference(field.values, (m, n), M), g, p)
        best = max(best, float(inc) / h**s)
    return best + float(lp_values(field.values, g, p))


def bernstein_ratios(values: np.ndarray, partition: DyadicPartition, p: float) -> dict[str, np.ndarray]:
    """Per-block ``||d_v R_j f|| / (2^(j) ||R_j f||)`` and ``||d_x R_j f|| / (2^(3j) ||R_j f||)``.

    Exponents follow the anisotropy weights; ``j`` runs over ``1..J``.
    """
    t1, t2 = partition.theta.theta
    g = partition.grid
    B = all_blocks(values, partition)[1:]
    j = np.arange(1, partition.J + 1)
    base = lp_values(B, g, p)
    dv = lp_values(d_dv(B, g, 1), g, p)
    dx = lp_values(d_dx(B, g, 1), g, p)
    shape = (-1,) + (1,) * (base.ndim - 1)
    return {
        "v": dv / (2.0 ** (t2 * j).reshape(shape) * base),
        "x": dx / (2.0 ** (t1 * j).reshape(shape) * base),
    }


@dataclass(frozen=True)
class HolderFit:
    slope: float
    stderr: float
    degenerate: bool = False


def holder_exponent(offsets: Sequence[float], norms: Sequence[float]) -> HolderFit:
    """Least-squares slope of ``log norm`` against ``log offset``.

    Zero increments make the exponent undefined; the fit is then flagged degenerate.
    """
    h = np.asarray(offsets, dtype=float)
    n = np.asarray(norms, dtype=float)
    if h.size < 4 or h.size != n.size:
        raise ValueError("need at least 4 (offset, norm) samples of matching length")
    if np.any(h <= 0):
        raise ValueError("offsets must be positive")
    if np.any(n <= 0) or not np.all(np.isfinite(n)):
        return HolderFit(float("nan"), float("nan"), True)
    fit = stats.linregress(np.log(h), np.log(n))
    return HolderFit(float(fit.slope), float(fit.stderr), False)


def increment_norms(values: np.ndarray, grid: PhaseGrid, axis: str, shifts: Sequence[int],
                    p: float = 4.0, order: int = 1) -> np.ndarray:
    """L^p norms of ``delta^(order)`` increments along ``axis`` for each integer shift.

    ``values`` may carry leading path axes; norms are averaged as ``(E ||.||_p^p)^(1/p)``
    over those axes (plain max for ``p = inf``).
    """
    if axis not in ("x", "v"):
        raise ValueError("axis must be 'x' or 'v'")
    out = []
    for m in shifts:
        sh = (m, 0) if axis == "x" else (0, m)
        d = lp_values(finite_difference(values, sh, order), grid, p)
        if np.isinf(p):
            out.append(float(np.max(d)))
        else:
            out.append(float(np.mean(d**p) ** (1.0 / p)))
    return np.asarray(out)
