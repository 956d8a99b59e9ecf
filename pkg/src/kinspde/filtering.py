"""Nonlinear filtering of a degenerate (kinetic) signal from a noisy velocity observation.

Signal and observation (one dimension each)::

    dX = V dt
    dV = tb(t, U) dt + ts(t, U) dB~ + s(t, U) dB
    dY = hb(t, U) dt + hs(t, Y) dB

with ``U = (X, V, Y)``.  With ``h = hb/hs`` and ``dW = dY/hs`` the unnormalised
conditional density solves the divergence-form equation::

    du = [((a u)_vv - (b u)_v) - v u_x] dt + [-(S u)_v + h u] dW,
    a = (S^2 + tS^2)/2,  b = tb - s h,

all coefficients frozen along the observed path ``y = Y_t``.  The conditional density
is ``u / <u, 1>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, FilterDegeneracyError
from .grid import Field, PhaseGrid, d_dv, d_dx
from .noise import WienerIncrements, make_generator
from .solvers import SKEProblem, Trajectory, solve

Coef = Callable[..., np.ndarray]


@dataclass(frozen=True)
class FilterModel:
    """Coefficients ``tilde_b, tilde_sigma, sigma, hat_b`` of ``(t, x, v, y)`` and ``hat_sigma(t, y)``.

    ``K`` bounds ``1/|tilde_sigma|`` and ``1/|hat_sigma|``.  ``diffusion_floor`` is a lower
    bound of ``a = (sigma^2 + tilde_sigma^2)/2``; it defaults to ``1/(2 K^2)``.
    """

    tilde_b: Coef
    tilde_sigma: Coef
    sigma: Coef
    hat_b: Coef
    hat_sigma: Coef
    K: float = 1.0
    name: str = "custom"
    diffusion_floor: float | None = None

    @property
    def nu0(self) -> float:
        return self.diffusion_floor if self.diffusion_floor is not None else 0.5 / self.K**2

    def h(self, t, x, v, y):
        return self.hat_b(t, x, v, y) / self.hat_sigma(t, y)

    def bar_b(self, t, x, v, y):
        return self.tilde_b(t, x, v, y) - self.sigma(t, x, v, y) * self.h(t, x, v, y)

    def validate(self, grid: PhaseGrid, ys=np.linspace(-3, 3, 13), lipschitz: float | None = None) -> None:
        """Probe the inverse bounds (and optionally a finite-difference Lipschitz bound) on the grid."""
        X, V = grid.mesh
        for y in ys:
            ts = np.asarray(self.tilde_sigma(0.0, X, V, y))
            hs = np.asarray(self.hat_sigma(0.0, y))
            if np.any(ts == 0) or np.any(hs == 0):
                raise ConfigurationError("tilde_sigma and hat_sigma must be non-singular")
            if np.max(1.0 / np.abs(ts)) > self.K + 1e-12 or np.max(1.0 / np.abs(hs)) > self.K + 1e-12:
                raise ConfigurationError(f"inverse diffusion bound K={self.K} violated at y={y}")
            if lipschitz is not None:
                for fn in (self.tilde_b, self.tilde_sigma, self.sigma, self.hat_b):
                    F = np.broadcast_to(np.asarray(fn(0.0, X, V, y), dtype=float), X.shape)
                    slope = max(np.abs(np.diff(F, axis=0)).max() / grid.hx,
                                np.abs(np.diff(F, axis=1)).max() / grid.hv)
                    if slope > lipschitz:
                        raise ConfigurationError(f"coefficient slope {slope:.3g} exceeds {lipschitz}")


def langevin_model() -> FilterModel:
    """``dX = V dt, dV = dB~ - dW`` observed through ``Y = W``."""
    return FilterModel(
        tilde_b=lambda t, x, v, y: 0.0 * v,
        tilde_sigma=lambda t, x, v, y: 1.0 + 0.0 * v,
        sigma=lambda t, x, v, y: -1.0 + 0.0 * v,
        hat_b=lambda t, x, v, y: 0.0 * v,
        hat_sigma=lambda t, y: 1.0 + 0.0 * np.asarray(y, dtype=float),
        K=1.0,
        name="langevin",
        diffusion_floor=1.0,
    )


def damped_model(obs_gain: float = 1.0, coupling: float = 0.5) -> FilterModel:
    """Bounded nonlinear drift, observation ``tanh(x)`` and a ``y``-modulated cross noise."""
    return FilterModel(
        tilde_b=lambda t, x, v, y: -np.tanh(v) + 0.0 * x,
        tilde_sigma=lambda t, x, v, y: 1.0 + 0.0 * (x + v),
        sigma=lambda t, x, v, y: coupling * np.cos(y) + 0.0 * (x + v),
        hat_b=lambda t, x, v, y: obs_gain * np.tanh(x) + 0.0 * v,
        hat_sigma=lambda t, y: 1.0 + 0.0 * np.asarray(y, dtype=float),
        K=1.0,
        name="damped",
        diffusion_floor=0.5,
    )


@dataclass
class SignalPaths:
    Z: np.ndarray   # (paths, steps+1, 2)
    Y: np.ndarray   # (paths, steps+1)
    dW: np.ndarray  # (paths, steps) reconstructed driving increments dY / hat_sigma
    dt: float


def simulate_signal(model: FilterModel, z0: np.ndarray, T: float, steps: int, inc: WienerIncrements,
                    y0: float | np.ndarray = 0.0) -> SignalPaths:
    """Euler-Maruyama paths of ``(X, V, Y)``.

    ``inc`` carries two channels per path: the hidden noise ``B~`` and the observation
    noise ``B``.  ``z0`` has shape ``(paths, 2)``.
    """
    if steps < 1:
        raise DomainError("need at least one step")
    if inc.N < 2 or inc.steps < steps:
        raise ConfigurationError("signal simulation needs two noise channels over all steps")
    dt = T / steps
    if not np.isclose(inc.dt, dt, rtol=1e-12):
        raise ConfigurationError("increment dt does not match T/steps")
    P = inc.paths
    z0 = np.broadcast_to(np.asarray(z0, dtype=float), (P, 2))
    Z = np.empty((P, steps + 1, 2))
    Y = np.empty((P, steps + 1))
    dW = np.empty((P, steps))
    Z[:, 0] = z0
    Y[:, 0] = y0
    for n in range(steps):
        t = n * dt
        x, v, y = Z[:, n, 0], Z[:, n, 1], Y[:, n]
        dBt, dB = inc.dW[:, n, 0], inc.dW[:, n, 1]
        coefs = [model.tilde_b(t, x, v, y), model.tilde_sigma(t, x, v, y), model.sigma(t, x, v, y),
                 model.hat_b(t, x, v, y), model.hat_sigma(t, y)]
        if not all(np.all(np.isfinite(c)) for c in coefs):
            raise ConfigurationError(f"non-finite coefficient at step {n}")
        tb, ts, s, hb, hs = coefs
        Z[:, n + 1, 0] = x + v * dt
        Z[:, n + 1, 1] = v + tb * dt + ts * dBt + s * dB
        dY = hb * dt + hs * dB
        Y[:, n + 1] = y + dY
        dW[:, n] = dY / hs
    return SignalPaths(Z, Y, dW, dt)


@dataclass
class FilterState:
    """Unnormalised density ``u``, conditional density ``pi`` and the driving path at time ``t``."""

    u: Field
    pi: Field
    Y_path: np.ndarray
    W_path: np.ndarray
    t: float


def zakai_problem(model: FilterModel, grid: PhaseGrid, Y: np.ndarray, dt: float, u0) -> SKEProblem:
    """Divergence-form problem with coefficients frozen along each observed path ``Y[p, n]``."""
    X, V = grid.mesh
    Y = np.atleast_2d(Y)

    def ycol(n):
        return Y[:, n][:, None, None]

    def a(t, n):
        S = model.sigma(t, X, V, ycol(n))
        tS = model.tilde_sigma(t, X, V, ycol(n))
        return 0.5 * (S**2 + tS**2)

    def b(t, n):
        return model.bar_b(t, X, V, ycol(n))

    def S(t, n):
        return model.sigma(t, X, V, ycol(n))

    def g(t, n, u):
        return (model.h(t, X, V, ycol(n)) * u)[:, None]

    margin = 1.0 / model.K**2
    return SKEProblem(grid, u0, "divergence", a=a, b=b, sigma=[S], g=g, nu0=model.nu0,
                      c0=margin * (1 - 1e-12))


def solve_zakai(model: FilterModel, grid: PhaseGrid, Y_path: np.ndarray, W_incr: np.ndarray, u0,
                dt: float, snapshot_stride: int = 16, observer=None, check_stability: bool = True,
                keep_fields: bool = True) -> Trajectory:
    """Unnormalised filter driven by the reconstructed increments ``W_incr`` (shape ``(paths, steps)``)."""
    u0v = u0.values if isinstance(u0, Field) else np.asarray(u0, dtype=float)
    if np.any(u0v < 0) or u0v.sum() <= 0:
        raise ConfigurationError("initial density must be nonnegative with positive mass")
    W_incr = np.atleast_2d(W_incr)
    steps = W_incr.shape[1]
    prob = zakai_problem(model, grid, Y_path, dt, u0v)
    inc = WienerIncrements(0, 0, dt, W_incr[:, :, None])
    return solve(prob, steps * dt, steps, inc, snapshot_stride, keep_fields=keep_fields,
                 observer=observer, check_stability=check_stability)


def normalize_values(u: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    pos = np.clip(u, 0.0, None)
    mass = grid.cell * pos.sum(axis=(-2, -1), keepdims=True)
    if np.any(mass <= 1e-12):
        raise FilterDegeneracyError("filter mass vanished")
    return pos / mass


def normalize(u: Field) -> Field:
    """``u+ / ||u+||_1``."""
    return Field(u.grid, normalize_values(u.values, u.grid))


def tv_distance(p: np.ndarray, q: np.ndarray, grid: PhaseGrid) -> float:
    return float(0.5 * grid.cell * np.abs(p - q).sum())


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = weights.size
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, positions)


@dataclass
class ParticleCloud:
    z: np.ndarray        # (n, 2)
    weights: np.ndarray  # normalised
    resamples: int

    def density(self, grid: PhaseGrid) -> np.ndarray:
        """Weighted histogram on the grid cells centred at the lattice points."""
        ix = np.floor((self.z[:, 0] + grid.Lx) / grid.hx + 0.5).astype(int) % grid.Nx
        iv = np.floor((self.z[:, 1] + grid.Lv) / grid.hv + 0.5).astype(int) % grid.Nv
        H = np.zeros(grid.shape)
        np.add.at(H, (ix, iv), self.weights)
        return H / grid.cell

    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights**2))


def particle_filter(model: FilterModel, Y_path: np.ndarray, W_incr: np.ndarray, z0: np.ndarray, dt: float,
                    seed: int, stream_id: int = 0, resample_frac: float = 0.5,
                    min_ess: float = 10.0) -> ParticleCloud:
    """Bootstrap filter under the reference measure.

    Particles move by ``dV = b dt + tS dB~ + S dW`` with the observed ``dW`` and independent
    ``B~``; weights pick up ``exp(h dW - h^2 dt / 2)``.  Systematic resampling is triggered
    when the effective sample size drops below ``resample_frac * n``.
    """
    z = np.array(z0, dtype=float, copy=True)
    n = z.shape[0]
    if n < 1:
        raise ConfigurationError("need at least one particle")
    rng = make_generator(seed, stream_id)
    logw = np.zeros(n)
    w = np.full(n, 1.0 / n)
    resamples = 0
    for k, dW in enumerate(W_incr):
        t = k * dt
        y = Y_path[k]
        x, v = z[:, 0], z[:, 1]
        h = model.h(t, x, v, y)
        bb = model.bar_b(t, x, v, y)
        ts = model.tilde_sigma(t, x, v, y)
        s = model.sigma(t, x, v, y)
        logw += h * dW - 0.5 * h**2 * dt
        xi = rng.standard_normal(n)
        z[:, 0] = x + v * dt
        z[:, 1] = v + bb * dt + ts * np.sqrt(dt) * xi + s * dW
        logw -= logw.max()
        w = np.exp(logw)
        w /= w.sum()
        ess = 1.0 / np.sum(w**2)
        if n >= min_ess and ess < min_ess:
            raise FilterDegeneracyError(f"effective sample size {ess:.2f} below {min_ess} at step {k}")
        if ess < resample_frac * n:
            idx = systematic_resample(w, rng)
            z = z[idx]
            logw = np.zeros(n)
            w = np.full(n, 1.0 / n)
            resamples += 1
    return ParticleCloud(z, w, resamples)


def filter_operators(model: FilterModel, grid: PhaseGrid, phi: np.ndarray, t: float, y):
    """``(L + v d_x) phi`` and ``M phi = S phi_v + h phi`` for test functions ``phi`` at fixed ``y``."""
    X, V = grid.mesh
    S = model.sigma(t, X, V, y)
    tS = model.tilde_sigma(t, X, V, y)
    a = 0.5 * (S**2 + tS**2)
    b = model.bar_b(t, X, V, y)
    h = model.h(t, X, V, y)
    L = a * d_dv(phi, grid, 2) + b * d_dv(phi, grid, 1) + V * d_dx(phi, grid, 1)
    M = S * d_dv(phi, grid, 1) + h * phi
    return L, M, h


@dataclass
class FilterResiduals:
    kushner: np.ndarray     # (paths, tests)
    zakai: np.ndarray       # (paths, tests)
    mass_error: np.ndarray  # (paths,) <u_T, 1> minus the stochastic exponential


class FilterMonitor:
    """Solver observer accumulating the normalised-filter, Zakai and mass-identity residuals.

    The normalised equation is checked with the innovation ``dW - Pi(h) dt``.
    """

    def __init__(self, model: FilterModel, grid: PhaseGrid, Y: np.ndarray, tests: np.ndarray, dt: float):
        self.model, self.grid, self.dt = model, grid, dt
        self.Y = np.atleast_2d(Y)
        self.tests = np.asarray(tests)
        self.k_acc = self.z_acc = None
        self.log_exp = None
        self.first = None
        self.result: FilterResiduals | None = None

    def _pairs(self, w, arr):
        # w: (p, Nx, Nv); arr: (p, m, Nx, Nv) or (m, Nx, Nv)
        if arr.ndim == 3:
            return self.grid.cell * np.einsum("pij,mij->pm", w, arr)
        return self.grid.cell * np.einsum("pij,pmij->pm", w, arr)

    def __call__(self, n, t, u, dW):
        g = self.grid
        pi = normalize_values(u, g)
        mass = g.cell * u.sum(axis=(-2, -1))
        if self.first is None:
            self.first = (self._pairs(pi, self.tests), self._pairs(u, self.tests), mass.copy())
            self.k_acc = np.zeros_like(self.first[0])
            self.z_acc = np.zeros_like(self.first[0])
            self.log_exp = np.log(mass)
        if dW is None:
            self.result = FilterResiduals(
                kushner=self._pairs(pi, self.tests) - self.first[0] - self.k_acc,
                zakai=self._pairs(u, self.tests) - self.first[1] - self.z_acc,
                mass_error=mass - np.exp(self.log_exp),
            )
            return
        y = self.Y[:, n][:, None, None, None]
        L, M, h = filter_operators(self.model, g, self.tests[None], t, y)
        dw = dW[:, 0]
        Pi_h = g.cell * np.einsum("pij,pij->p", pi, h[:, 0] * np.ones_like(pi))
        pi_phi = self._pairs(pi, self.tests)
        innov = dw - Pi_h * self.dt
        self.k_acc += self._pairs(pi, L) * self.dt + (self._pairs(pi, M) - pi_phi * Pi_h[:, None]) * innov[:, None]
        self.z_acc += self._pairs(u, L) * self.dt + self._pairs(u, M) * dw[:, None]
        self.log_exp += Pi_h * dw - 0.5 * Pi_h**2 * self.dt


def gaussian_density(grid: PhaseGrid, mean, cov) -> np.ndarray:
    """Bivariate normal density on the lattice (per path if ``mean``/``cov`` carry a leading axis)."""
    X, V = grid.mesh
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    mx = mean[..., 0, None, None]
    mv = mean[..., 1, None, None]
    a, b, c = cov[..., 0, 0, None, None], cov[..., 0, 1, None, None], cov[..., 1, 1, None, None]
    det = a * c - b * b
    dx, dv = X - mx, V - mv
    q = (c * dx * dx - 2 * b * dx * dv + a * dv * dv) / det
    return np.exp(-0.5 * q) / (2 * np.pi * np.sqrt(det))


def langevin_posterior(W: np.ndarray, dt: float, m0, c0, t_index: int | None = None):
    """Exact conditional mean and covariance for the Langevin model given the observed ``W``.

    ``V_t = V_0 + B~_t - W_t`` and ``X_t = X_0 + int_0^t V``.  Between observation times
    ``W`` is a Brownian bridge, so the time integral of ``W`` has conditional mean given by
    the trapezoid rule; the bridge variance ``t dt^2 / 12`` is neglected.  ``W`` holds
    increments of shape ``(paths, steps)``.
    """
    W = np.atleast_2d(W)
    steps = W.shape[1] if t_index is None else t_index
    Wc = np.concatenate([np.zeros((W.shape[0], 1)), np.cumsum(W[:, :steps], axis=1)], axis=1)
    t = steps * dt
    intW = dt * (Wc[:, 1:-1].sum(axis=1) + 0.5 * Wc[:, -1])
    m0 = np.asarray(m0, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    mean = np.stack([m0[0] + m0[1] * t - intW, m0[1] - Wc[:, -1]], axis=1)
    A = np.array([[1.0, t], [0.0, 1.0]])
    cov = A @ c0 @ A.T + np.array([[t**3 / 3.0, t**2 / 2.0], [t**2 / 2.0, t]])
    return mean, cov
