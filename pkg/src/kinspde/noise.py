"""Velocity-time white noise: orthonormal velocity bases, Wiener increments, the Brownian sheet.

The sheet is expanded as ``B(t, v) = sum_k (int_0^v eta_k) W^k_t`` for an orthonormal
family ``eta_k`` on ``[-Lv, Lv)``.  Its increment in ``t`` has formal v-derivative
``sum_k eta_k(v) dW^k``, which is the noise field seen by the solvers.

Increments come from the counter-based Philox generator keyed by ``(seed, stream_id)``,
so a path is reproducible independently of how an ensemble is scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import Field, PhaseGrid

KINDS = ("trigonometric", "haar")


@dataclass(frozen=True, eq=False)
class NoiseBasis:
    N: int
    Lv: float
    kind: str
    eta: np.ndarray  # (N, Nv) samples on the v-grid
    v: np.ndarray

    @property
    def hv(self) -> float:
        return 2.0 * self.Lv / self.v.size

    def gram(self) -> np.ndarray:
        return self.hv * self.eta @ self.eta.T

    def antiderivative(self) -> np.ndarray:
        """``int_0^v eta_k`` on the v-grid by the trapezoid rule (``v = 0`` is a grid point)."""
        iz = int(np.argmin(np.abs(self.v)))
        seg = 0.5 * self.hv * (self.eta[:, 1:] + self.eta[:, :-1])
        cum = np.concatenate([np.zeros((self.N, 1)), np.cumsum(seg, axis=1)], axis=1)
        return cum - cum[:, iz:iz + 1]

    def project(self, values: np.ndarray) -> np.ndarray:
        """Coefficients ``<f, eta_k>_v`` along the last axis."""
        return self.hv * values @ self.eta.T


def _trig(v: np.ndarray, Lv: float, N: int) -> np.ndarray:
    rows = [np.full_like(v, 1.0 / np.sqrt(2.0 * Lv))]
    m = 1
    while len(rows) < N:
        rows.append(np.cos(np.pi * m * v / Lv) / np.sqrt(Lv))
        if len(rows) < N:
            rows.append(np.sin(np.pi * m * v / Lv) / np.sqrt(Lv))
        m += 1
    return np.array(rows)


def _haar(v: np.ndarray, Lv: float, N: int) -> np.ndarray:
    Nv = v.size
    rows = [np.full(Nv, 1.0 / np.sqrt(2.0 * Lv))]
    level = 0
    while len(rows) < N:
        count = 2**level
        width = Nv // count
        if width < 2:
            break
        for i in range(count):
            if len(rows) == N:
                break
            h = np.zeros(Nv)
            lo, mid, hi = i * width, i * width + width // 2, (i + 1) * width
            amp = 1.0 / np.sqrt(width * (2.0 * Lv / Nv))
            h[lo:mid] = amp
            h[mid:hi] = -amp
            rows.append(h)
        level += 1
    return np.array(rows)


def make_basis(grid: PhaseGrid, N: int | None = None, kind: str = "trigonometric") -> NoiseBasis:
    """Orthonormal velocity family of size ``N`` (default ``Nv/2``) on the grid."""
    if kind not in KINDS:
        raise ConfigurationError(f"unknown basis kind {kind!r}; choose from {KINDS}")
    N = grid.Nv // 2 if N is None else int(N)
    limit = grid.Nv // 2 if kind == "trigonometric" else grid.Nv
    if not 1 <= N <= limit:
        raise ConfigurationError(f"N={N} outside 1..{limit} for the {kind} basis on Nv={grid.Nv}")
    eta = _trig(grid.v, grid.Lv, N) if kind == "trigonometric" else _haar(grid.v, grid.Lv, N)
    eta.setflags(write=False)
    return NoiseBasis(N, grid.Lv, kind, eta, grid.v)


@dataclass(frozen=True, eq=False)
class WienerIncrements:
    """Independent ``N(0, dt)`` increments, shape ``(paths, steps, N)``."""

    seed: int
    stream_id: int
    dt: float
    dW: np.ndarray

    @property
    def paths(self) -> int:
        return self.dW.shape[0]

    @property
    def steps(self) -> int:
        return self.dW.shape[1]

    @property
    def N(self) -> int:
        return self.dW.shape[2]

    def brownian(self) -> np.ndarray:
        """``W`` at step times ``0..steps``, shape ``(paths, steps + 1, N)``."""
        W = np.cumsum(self.dW, axis=1)
        return np.concatenate([np.zeros((self.paths, 1, self.N)), W], axis=1)

    def coarsen(self, factor: int) -> "WienerIncrements":
        """Sum blocks of ``factor`` consecutive increments (same paths, step ``factor*dt``)."""
        if self.steps % factor:
            raise ConfigurationError(f"steps={self.steps} not divisible by {factor}")
        dW = self.dW.reshape(self.paths, self.steps // factor, factor, self.N).sum(axis=2)
        return WienerIncrements(self.seed, self.stream_id, self.dt * factor, dW)

    def select(self, paths: slice) -> "WienerIncrements":
        return WienerIncrements(self.seed, self.stream_id, self.dt, self.dW[paths])


def make_generator(seed: int, stream_id: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(stream_id) & (2**64 - 1)]))


def make_increments(seed: int, stream_id: int, dt: float, steps: int, N: int,
                    paths: int = 1) -> WienerIncrements:
    if dt <= 0 or steps < 1 or N < 1 or paths < 1:
        raise ConfigurationError("increments need dt > 0 and positive steps, N, paths")
    rng = make_generator(seed, stream_id)
    dW = np.sqrt(dt) * rng.standard_normal((paths, steps, N))
    dW.setflags(write=False)
    return WienerIncrements(int(seed), int(stream_id), float(dt), dW)


def sheet_value(inc: WienerIncrements, basis: NoiseBasis, step: int, v=None) -> np.ndarray:
    """``B(t_step, v)`` per path.

    ``v=None`` returns the whole v-grid (shape ``(paths, Nv)``); a scalar or array ``v``
    is linearly interpolated between grid points.
    """
    if not 0 <= step <= inc.steps:
        raise DomainError(f"step {step} outside 0..{inc.steps}")
    if basis.N != inc.N:
        raise ConfigurationError("basis size and increment width differ")
    W = inc.dW[:, :step].sum(axis=1)  # (paths, N)
    Ieta = basis.antiderivative()
    if v is None:
        return W @ Ieta
    cols = np.array([np.interp(v, basis.v, row) for row in Ieta])  # (N, ...) after interp
    return np.tensordot(W, cols, axes=(1, 0))


def noise_field(dW_row: np.ndarray, basis: NoiseBasis) -> np.ndarray:
    """``sum_k eta_k(v) dW^k``: the sheet increment's v-derivative, shape ``(..., Nv)``."""
    return dW_row @ basis.eta


@dataclass(frozen=True, eq=False)
class SequenceField:
    """l^2-valued field stored as ``components[k]`` of shape ``(N, Nx, Nv)``."""

    grid: PhaseGrid
    components: np.ndarray

    def pointwise_norm(self) -> np.ndarray:
        return np.sqrt(np.einsum("k...,k...->...", self.components, self.components))


def lift_G(h: Field, basis: NoiseBasis, N: int | None = None) -> SequenceField:
    """``(h eta_1, ..., h eta_N)``."""
    N = basis.N if N is None else int(N)
    if not 1 <= N <= basis.N:
        raise DomainError(f"N={N} exceeds basis size {basis.N}")
    comps = h.values[None, :, :] * basis.eta[:N, None, :]
    return SequenceField(h.grid, comps)


def walsh_integral(xi: Callable[[float], np.ndarray], inc: WienerIncrements, basis: NoiseBasis) -> np.ndarray:
    """``int int xi(s, v) dB(s, v)`` for a step-function integrand ``xi(t_n, v)`` on the v-grid.

    Reduces to ``sum_n sum_k <xi(t_n), eta_k> dW^k_n`` per path.
    """
    total = np.zeros(inc.paths)
    for n in range(inc.steps):
        coef = basis.project(np.asarray(xi(n * inc.dt), dtype=float))
        total += inc.dW[:, n, :] @ coef
    return total
