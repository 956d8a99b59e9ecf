"""Kinetic heat kernel, the free-transport shear and the kinetic semigroup.

For ``(X_t, V_t) = (sqrt(2 nu) int_0^t W ds, sqrt(2 nu) W_t)`` the semigroup is

    P_t f(x, v) = E f(x + t v + X_t, v + V_t),

with generator ``nu d_vv + v d_x``.  ``(X_t, V_t)`` is centred Gaussian with
covariance ``nu * [[2t^3/3, t^2], [t^2, 2t]]``, so on the grid

    P_t = Gamma_t o G_t,

where ``G_t`` multiplies the mode ``(kx, kv)`` by
``exp(-nu (t^3 kx^2/3 + t^2 kx kv + t kv^2))`` and ``Gamma_t f(x, v) = f(x + t v, v)``
is applied row by row as the phase ``exp(i kx t v)``.  General ``nu`` only scales
the covariance; no time substitution is needed.

The L^2 adjoint ``P*_t`` (generator ``nu d_vv - v d_x``, the forward
Fokker-Planck flow of the pair) is ``Gamma_{-t}`` composed with the Gaussian whose
cross term has the opposite sign.  ``P*_t delta_0`` is the density ``p_t``.

Shear phases are evaluated at the lattice velocities, so the x-periodic wrap of
``Gamma_t`` is exact on the torus; fields must stay away from the box edges for
the result to represent the whole-space operator.
"""
from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .errors import DomainError
from .grid import Field, PhaseGrid, d_dv, d_dx, lp_values

SQRT3 = np.sqrt(3.0)


def kernel_density(t, x, v, nu: float = 1.0):
    """Density of ``(X_t, V_t)``: ``sqrt(3)/(2 pi nu t^2) exp(-(3x^2 + (3x - 2tv)^2)/(4 nu t^3))``."""
    t = float(t)
    if t <= 0:
        raise DomainError(f"kernel needs t > 0, got {t}")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    q = (3.0 * x**2 + (3.0 * x - 2.0 * t * v) ** 2) / (4.0 * nu * t**3)
    return SQRT3 / (2.0 * np.pi * nu * t**2) * np.exp(-q)


def kernel_covariance(t: float, nu: float = 1.0) -> np.ndarray:
    return nu * np.array([[2.0 * t**3 / 3.0, t**2], [t**2, 2.0 * t]])


def _check_shear(grid: PhaseGrid, t: float) -> None:
    if abs(t) * grid.Lv > grid.Lx * (1 + 1e-12):
        raise DomainError(
            f"|t|*Lv = {abs(t) * grid.Lv:.4g} exceeds Lx = {grid.Lx:.4g}; the shear wraps the box"
        )


def _shear_phase(grid: PhaseGrid, s: float) -> np.ndarray:
    # rfft along x: rows are kx >= 0, columns are lattice velocities
    return np.exp(1j * np.outer(grid.kx_half, s * grid.v))


def transport_values(values: np.ndarray, grid: PhaseGrid, t: float) -> np.ndarray:
    F = sfft.rfft(values, axis=-2)
    F *= _shear_phase(grid, t)
    return sfft.irfft(F, n=grid.Nx, axis=-2)


def transport(field: Field, t: float) -> Field:
    """``Gamma_t f(x, v) = f(x + t v, v)``."""
    _check_shear(field.grid, t)
    if t == 0:
        return field
    return Field(field.grid, transport_values(field.values, field.grid, t))


class KineticPropagator:
    """Cached spectral factors of ``P_t`` (``adjoint=False``) or ``P*_t`` for one time ``t``.

    ``apply`` accepts arrays of shape ``(..., Nx, Nv)``.
    """

    def __init__(self, grid: PhaseGrid, t: float, nu: float = 1.0, adjoint: bool = False,
                 check_shear: bool = True):
        if t < 0:
            raise DomainError(f"semigroup needs t >= 0, got {t}")
        if nu <= 0:
            raise DomainError(f"nu must be positive, got {nu}")
        if check_shear:
            _check_shear(grid, t)
        self.grid, self.t, self.nu, self.adjoint = grid, float(t), float(nu), adjoint
        s = -1.0 if adjoint else 1.0
        KX = grid.kx_half[:, None]
        KV = grid.kv[None, :]
        t = self.t
        self.multiplier = np.exp(-nu * (t**3 * KX**2 / 3.0 + s * t**2 * KX * KV + t * KV**2))
        self.phase = _shear_phase(grid, s * t)

    def apply(self, values: np.ndarray) -> np.ndarray:
        if self.t == 0:
            return np.array(values, dtype=float, copy=True)
        g = self.grid
        F = sfft.rfft(values, axis=-2)
        F = sfft.fft(F, axis=-1, overwrite_x=True)
        F *= self.multiplier
        F = sfft.ifft(F, axis=-1, overwrite_x=True)
        F *= self.phase
        return sfft.irfft(F, n=g.Nx, axis=-2)


def apply_semigroup(field: Field, t: float, nu: float = 1.0, adjoint: bool = False) -> Field:
    """``P_t f`` (or ``P*_t f`` with ``adjoint=True``) by exact spectral multiplication."""
    if t < 0:
        raise DomainError(f"semigroup needs t >= 0, got {t}")
    if t == 0:
        return field
    prop = KineticPropagator(field.grid, t, nu, adjoint)
    return Field(field.grid, prop.apply(field.values))


def generator_values(values: np.ndarray, grid: PhaseGrid, nu: float = 1.0,
                     adjoint: bool = False) -> np.ndarray:
    """``nu d_vv f + v d_x f`` (sign of the transport flipped for the adjoint)."""
    s = -1.0 if adjoint else 1.0
    return nu * d_dv(values, grid, 2) + s * grid.v * d_dx(values, grid, 1)


def generator_residual(field: Field, t: float, h: float, nu: float = 1.0,
                       adjoint: bool = False) -> float:
    """L^2 norm of ``(P_{t+h} f - P_{t-h} f)/(2h) - L P_t f`` with spectral derivatives."""
    if not (t > h > 0):
        raise DomainError("generator_residual needs t > h > 0")
    g = field.grid
    plus = KineticPropagator(g, t + h, nu, adjoint).apply(field.values)
    minus = KineticPropagator(g, t - h, nu, adjoint).apply(field.values)
    mid = KineticPropagator(g, t, nu, adjoint).apply(field.values)
    r = (plus - minus) / (2.0 * h) - generator_values(mid, g, nu, adjoint)
    return float(lp_values(r, g, 2))


def apply_semigroup_quadrature(field: Field, t: float, nu: float = 1.0) -> Field:
    """Slow oracle: periodic lattice quadrature of ``int p_t(a, b) f(x + tv + a, v + b)``.

    Substituting ``a' = t v + a`` keeps every evaluation of ``f`` on the lattice:
    ``P_t f(x_i, v_j) = hx hv sum_{m,n} p_t(m hx - t v_j, n hv) f(x_i + m hx, v_j + n hv)``,
    with offsets in ``[-N, N)`` along each axis and periodic wrap of ``f``, so kernel
    images one period away are included.  Cost is O((Nx Nv)^2).
    """
    g = field.grid
    if t <= 0:
        raise DomainError("quadrature oracle needs t > 0")
    m = np.arange(-g.Nx, g.Nx)
    n = np.arange(-g.Nv, g.Nv)
    f = field.values
    out = np.empty_like(f)
    ix = np.arange(g.Nx)
    for j, vj in enumerate(g.v):
        # K[m, n] for this row
        K = kernel_density(t, m[:, None] * g.hx - t * vj, n[None, :] * g.hv, nu) * g.cell
        rows = f[:, (j + n) % g.Nv]  # (Nx, len(n))
        # out[i, j] = sum_{m,n} K[m,n] rows[(i+m) % Nx, n]
        shifted = rows[(ix[:, None] + m[None, :]) % g.Nx]  # (Nx, len(m), len(n))
        out[:, j] = np.einsum("imn,mn->i", shifted, K)
    return Field(g, out)


def second_moments(values: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Covariance matrix of a (nonnegative) density sampled on the grid."""
    X, V = grid.mesh
    mass = values.sum()
    mx = (X * values).sum() / mass
    mv = (V * values).sum() / mass
    dx, dv = X - mx, V - mv
    cxx = (dx * dx * values).sum() / mass
    cvv = (dv * dv * values).sum() / mass
    cxv = (dx * dv * values).sum() / mass
    return np.array([[cxx, cxv], [cxv, cvv]])
