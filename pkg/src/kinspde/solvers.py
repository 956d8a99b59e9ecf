"""Exponential (mild) Euler solvers for stochastic kinetic equations in one space dimension.

Non-divergence form::

    du = [a u_vv + v u_x + b u_v + f] dt + sum_k [sigma^k u_v + g^k] dW^k

Divergence (adjoint) form::

    du = [(a u)_vv - v u_x - (b u)_v + f] dt + sum_k [-(sigma^k u)_v + g^k] dW^k

With ``nu0 = min a`` the kinetic part ``nu0 u_vv +- v u_x`` is integrated exactly by
the spectral semigroup and everything else is frozen at the left end point::

    u_{n+1} = P_dt (u_n + dt R(t_n, u_n) + noise(t_n, u_n) dW_n).

This is the discrete Duhamel formula with all integrands evaluated at ``t_n``.  A
velocity-time white noise enters as ``h(t, u) dB(t, v)``; its increment is
``h sum_k eta_k(v) dW^k`` for a noise basis ``eta_k``.

All state arrays carry a leading path axis: ``(paths, Nx, Nv)``.  Coefficients are
scalars, arrays broadcasting against that shape, or callables ``c(t, n)`` returning
either; forcings are callables ``f(t, n, u)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, InstabilityError
from .grid import Field, PhaseGrid, d_dv, inner, lp_values, translate
from .noise import NoiseBasis, WienerIncrements
from .semigroup import KineticPropagator

FORMS = ("model", "nondivergence", "divergence")


def _value(c, t: float, n: int):
    return c(t, n) if callable(c) else c


def _is_zero(c) -> bool:
    return c is None or (not callable(c) and np.all(np.asarray(c) == 0))


@dataclass(eq=False)
class SKEProblem:
    """Coefficients, forcings and initial data of one stochastic kinetic equation.

    ``sigma`` lists one gradient-noise coefficient per Wiener channel, ``g(t, n, u)`` returns
    channel forcings of shape ``(paths, K, Nx, Nv)``, and ``sheet(t, n, u)`` returns the
    intensity ``h`` of a velocity-time white noise expanded in ``basis``.
    """

    grid: PhaseGrid
    u0: np.ndarray
    form: str = "model"
    a: object = 1.0
    b: object = 0.0
    sigma: Sequence | None = None
    f: Callable | None = None
    g: Callable | None = None
    sheet: Callable | None = None
    basis: NoiseBasis | None = None
    c0: float | None = None
    c1: float | None = None
    nu0: float | None = None
    guard: float = 1e12

    def __post_init__(self):
        if self.form not in FORMS:
            raise ConfigurationError(f"unknown form {self.form!r}; choose from {FORMS}")
        if isinstance(self.u0, Field):
            if self.u0.grid != self.grid:
                raise ConfigurationError("u0 lives on a different grid")
            self.u0 = self.u0.values
        self.u0 = np.asarray(self.u0, dtype=float)
        if self.u0.shape[-2:] != self.grid.shape:
            raise ConfigurationError(f"u0 shape {self.u0.shape} does not match grid {self.grid.shape}")
        if self.sheet is not None and self.basis is None:
            raise ConfigurationError("sheet noise needs a noise basis")
        if self.sheet is not None and (self.g is not None or self.sigma):
            raise ConfigurationError("sheet noise cannot be combined with channel noise")
        if self.form == "model":
            if callable(self.a) or np.ndim(self.a) != 0:
                raise ConfigurationError("model form needs a constant scalar diffusion a = nu")
            if not (_is_zero(self.b) and not self.sigma):
                raise ConfigurationError("model form has no drift or gradient noise")
        if self.nu0 is None:
            self.nu0 = float(np.min(_value(self.a, 0.0, 0)))
        if self.nu0 <= 0:
            raise ConfigurationError(f"diffusion floor nu0 = {self.nu0} must be positive")
        self.check_parabolicity(0.0, 0)

    @property
    def adjoint(self) -> bool:
        return self.form == "divergence"

    @property
    def channels(self) -> int | None:
        """Width of the Wiener increment row the problem expects (``None`` if noise-free)."""
        if self.sheet is not None:
            return self.basis.N
        if self.sigma:
            return len(self.sigma)
        return None

    def parabolicity_margin(self, t: float, n: int) -> float:
        a = np.asarray(_value(self.a, t, n), dtype=float)
        s2 = sum(np.asarray(_value(s, t, n), dtype=float) ** 2 for s in (self.sigma or []))
        return float(np.min(2.0 * a - s2))

    def check_parabolicity(self, t: float, n: int) -> None:
        margin = self.parabolicity_margin(t, n)
        floor = self.c0 if self.c0 is not None else 0.0
        if margin < floor - 1e-12 or margin <= 0:
            raise ConfigurationError(
                f"super-parabolicity fails at t={t:.4g}: min(2a - |sigma|^2) = {margin:.4g} < c0 = {floor:.4g}"
            )

    def dt_max(self) -> float:
        """Explicit-substep bound ``0.25 min(hv^2/max|a-nu0|, 1/(max|b|/hv + K max|sigma|^2/hv^2))``."""
        hv = self.grid.hv
        ares = float(np.max(np.abs(np.asarray(_value(self.a, 0.0, 0)) - self.nu0)))
        bmax = float(np.max(np.abs(_value(self.b, 0.0, 0))))
        sig = self.sigma or []
        smax = max((float(np.max(np.abs(_value(s, 0.0, 0)))) for s in sig), default=0.0)
        terms = [np.inf]
        if ares > 0:
            terms.append(hv**2 / ares)
        rate = bmax / hv + len(sig) * smax**2 / hv**2
        if rate > 0:
            terms.append(1.0 / rate)
        return 0.25 * min(terms)

    def residual_drift(self, t: float, n: int, u: np.ndarray) -> np.ndarray | float:
        """Explicit part of the drift beyond ``nu0 u_vv``, excluding ``f``."""
        g = self.grid
        out = 0.0
        ares = np.asarray(_value(self.a, t, n), dtype=float) - self.nu0
        b = _value(self.b, t, n)
        if self.form == "nondivergence":
            if np.any(ares != 0):
                out = out + ares * d_dv(u, g, 2)
            if not _is_zero(b):
                out = out + b * d_dv(u, g, 1)
        elif self.form == "divergence":
            if np.any(ares != 0):
                out = out + d_dv(ares * u, g, 2)
            if not _is_zero(b):
                out = out - d_dv(b * u, g, 1)
        return out

    def forcing(self, t: float, n: int, u: np.ndarray):
        if self.f is None:
            return 0.0
        return self.f(t, n, u) if callable(self.f) else self.f

    def noise(self, t: float, n: int, u: np.ndarray, dW: np.ndarray):
        """Stochastic increment for one step; ``dW`` has shape ``(paths, K)``."""
        g = self.grid
        out = 0.0
        expand = (slice(None),) + (None,) * (u.ndim - 1)
        if self.sheet is not None:
            h = self.sheet(t, n, u)
            out = out + h * (dW @ self.basis.eta)[:, None, :]
        for k, s in enumerate(self.sigma or []):
            s = _value(s, t, n)
            if self.form == "divergence":
                term = -d_dv(s * u, g, 1)
            else:
                term = s * d_dv(u, g, 1)
            out = out + term * dW[:, k][expand]
        if self.g is not None:
            G = self.g(t, n, u)
            out = out + np.einsum("pk...,pk->p...", G, dW[:, : G.shape[1]])
        return out


@dataclass
class Trajectory:
    """Strided snapshots and per-snapshot diagnostics of an ensemble run.

    ``fields`` has shape ``(snapshots, paths, Nx, Nv)`` (or is ``None`` when not kept);
    every diagnostic has shape ``(snapshots, paths)``.
    """

    grid: PhaseGrid
    times: np.ndarray
    fields: np.ndarray | None
    diagnostics: dict[str, np.ndarray]
    seed: int = 0
    stream_id: int = 0
    final: np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must increase strictly")
        for k, d in self.diagnostics.items():
            if len(d) != len(self.times):
                raise ValueError(f"diagnostic {k} has {len(d)} rows for {len(self.times)} snapshots")

    def field(self, snapshot: int, path: int = 0) -> Field:
        return Field(self.grid, self.fields[snapshot, path])


DIAGNOSTICS = ("mass", "l1", "l2", "linf", "pos_l1")


def diagnostics(u: np.ndarray, grid: PhaseGrid) -> dict[str, np.ndarray]:
    return {
        "mass": grid.cell * u.sum(axis=(-2, -1)),
        "l1": lp_values(u, grid, 1),
        "l2": lp_values(u, grid, 2),
        "linf": lp_values(u, grid, np.inf),
        "pos_l1": grid.cell * np.clip(u, 0.0, None).sum(axis=(-2, -1)),
    }


class _Recorder:
    def __init__(self, grid, stride, keep_fields):
        self.grid, self.stride, self.keep = grid, stride, keep_fields
        self.times, self.fields = [], []
        self.diag = {k: [] for k in DIAGNOSTICS}

    def __call__(self, n, t, u, force=False):
        if n % self.stride and not force:
            return
        if self.times and t <= self.times[-1]:
            return
        self.times.append(t)
        if self.keep:
            self.fields.append(u.copy())
        for k, val in diagnostics(u, self.grid).items():
            self.diag[k].append(val)

    def build(self, seed, stream_id, final):
        fields = np.array(self.fields) if self.keep else None
        diag = {k: np.array(v) for k, v in self.diag.items()}
        return Trajectory(self.grid, np.array(self.times), fields, diag, seed, stream_id, final)


def _initial_state(prob: SKEProblem, paths: int) -> np.ndarray:
    u0 = prob.u0
    if u0.ndim == 2:
        return np.broadcast_to(u0, (paths,) + u0.shape).copy()
    if u0.shape[0] != paths:
        raise ConfigurationError(f"u0 carries {u0.shape[0]} paths, increments carry {paths}")
    return u0.copy()


def _check_increments(prob: SKEProblem, inc: WienerIncrements | None, steps: int, dt: float):
    if inc is None:
        if prob.channels is not None:
            raise ConfigurationError("noisy problem needs Wiener increments")
        return
    if inc.steps < steps:
        raise ConfigurationError(f"increments cover {inc.steps} steps, need {steps}")
    if not np.isclose(inc.dt, dt, rtol=1e-12):
        raise ConfigurationError(f"increment dt {inc.dt} differs from step {dt}")
    need = prob.channels
    if need is not None and inc.N < need:
        raise ConfigurationError(f"problem needs {need} noise channels, increments have {inc.N}")


class Stepper:
    """One exponential Euler step with cached propagator."""

    def __init__(self, prob: SKEProblem, dt: float, check_stability: bool = True):
        if dt <= 0:
            raise DomainError("time step must be positive")
        if check_stability and dt > prob.dt_max() * (1 + 1e-12):
            raise ConfigurationError(f"dt={dt:.4g} exceeds the explicit stability bound {prob.dt_max():.4g}")
        self.prob, self.dt = prob, dt
        self.prop = KineticPropagator(prob.grid, dt, prob.nu0, prob.adjoint)
        self._time_dependent = any(callable(c) for c in [prob.a] + list(prob.sigma or []))

    def __call__(self, u: np.ndarray, n: int, dW: np.ndarray | None, picard: int = 0) -> np.ndarray:
        p, dt = self.prob, self.dt
        t = n * dt
        if self._time_dependent and n > 0:
            p.check_parabolicity(t, n)
        base = u
        if dW is not None:
            nz = p.noise(t, n, u, dW)
            base = u + nz
        drift = p.residual_drift(t, n, u)
        out = self.prop.apply(base + dt * (drift + p.forcing(t, n, u)))
        for _ in range(picard):
            out = self.prop.apply(base + dt * (drift + p.forcing(t, n, out)))
        return out


def _guard(u: np.ndarray, prob: SKEProblem, n: int, t: float) -> None:
    peak = float(np.max(np.abs(u))) if np.all(np.isfinite(u)) else np.inf
    if peak > prob.guard:
        raise InstabilityError(f"sup norm {peak:.3g} exceeded guard {prob.guard:.3g} at step {n} (t={t:.4g})")


def solve(prob: SKEProblem, T: float, steps: int, inc: WienerIncrements | None = None,
          snapshot_stride: int = 16, keep_fields: bool = True, picard: int = 0,
          observer: Callable | None = None, check_stability: bool = True) -> Trajectory:
    """Run ``steps`` exponential Euler steps to horizon ``T``.

    ``observer(n, t, u, dW_row)`` is called before every step (and once at the end with
    ``dW_row=None``) for weak-form bookkeeping and custom sampling.  Noise-free runs pass
    an empty ``(paths, 0)`` row so the end of the run stays unambiguous.
    """
    if steps < 1 or T <= 0:
        raise DomainError("need T > 0 and steps >= 1")
    dt = T / steps
    _check_increments(prob, inc, steps, dt)
    paths = inc.paths if inc is not None else (prob.u0.shape[0] if prob.u0.ndim == 3 else 1)
    stepper = Stepper(prob, dt, check_stability)
    rec = _Recorder(prob.grid, max(1, snapshot_stride), keep_fields)
    u = _initial_state(prob, paths)
    for n in range(steps):
        t = n * dt
        rec(n, t, u)
        dW = inc.dW[:, n, :] if inc is not None else None
        if observer is not None:
            observer(n, t, u, dW if dW is not None else np.zeros((paths, 0)))
        u = stepper(u, n, dW, picard)
        _guard(u, prob, n, t + dt)
    rec(steps, T, u, force=True)
    if observer is not None:
        observer(steps, T, u, None)
    return rec.build(inc.seed if inc else 0, inc.stream_id if inc else 0, u)


def step_model(u: Field, t: float, dt: float, prob: SKEProblem, dW_row=None) -> Field:
    """One mild Euler step of the constant-coefficient model equation for a single field."""
    if prob.form != "model":
        raise ConfigurationError("step_model needs a model-form problem")
    stepper = Stepper(prob, dt)
    n = int(round(t / dt))
    dW = None if dW_row is None else np.asarray(dW_row, dtype=float).reshape(1, -1)
    out = stepper(u.values[None], n, dW)
    _guard(out, prob, n, t + dt)
    return Field(u.grid, out[0])


def solve_linear(prob: SKEProblem, T: float, steps: int, inc: WienerIncrements | None = None,
                 snapshot_stride: int = 16, **kw) -> Trajectory:
    return solve(prob, T, steps, inc, snapshot_stride, **kw)


def solve_nonlinear(prob: SKEProblem, T: float, steps: int, inc: WienerIncrements | None = None,
                    picard: int | None = None, snapshot_stride: int = 16, **kw) -> Trajectory:
    """Nonlinear drift ``f(t, n, u)`` and noise intensity ``g``/``sheet`` evaluated at the step start.

    With ``picard=K`` the drift is iterated ``K`` times on the step's end state while the
    noise integrand stays at the left point (which keeps the Itô interpretation).
    """
    return solve(prob, T, steps, inc, snapshot_stride, picard=int(picard or 0), **kw)


def truncated_power(gamma: float, m) -> Callable[[np.ndarray], np.ndarray]:
    """``u -> min(|u|, m)^(1 + gamma)`` with ``m`` a scalar or a per-path array."""
    def gm(u):
        mm = np.asarray(m, dtype=float).reshape((-1,) + (1,) * (u.ndim - 1)) if np.ndim(m) else m
        return np.minimum(np.abs(u), mm) ** (1.0 + gamma)
    return gm


@dataclass
class StoppingReport:
    levels: list[float]
    crossings: list[list[tuple[float, float]]]  # per path: (time, level crossed)
    final_level: np.ndarray
    stopped: np.ndarray
    stop_time: np.ndarray
    reached: float

    @property
    def any_stopped(self) -> bool:
        return bool(np.any(self.stopped))


def solve_superlinear(grid: PhaseGrid, u0, gamma: float, m_levels: Sequence[float], T: float, steps: int,
                      inc: WienerIncrements, basis: NoiseBasis, nu: float = 1.0,
                      snapshot_stride: int = 16, keep_fields: bool = True) -> tuple[Trajectory, StoppingReport]:
    """Kinetic Anderson model with noise ``g_m(u) dB``, ``g_m(u) = min(|u|, m)^(1+gamma)``.

    Each path starts on the smallest level.  When a step ends with ``sup|u| >= m`` the
    path is rewound to the step start and the step is redone with the next level and the
    same increments.  Since ``g_m = g_m'`` wherever ``|u| < m``, the patched path agrees
    with a direct run at the larger level.  A path that crosses the last level is frozen
    and flagged as stopped.
    """
    if not 0 <= gamma < 0.125:
        raise ConfigurationError("gamma must lie in [0, 1/8)")
    levels = [float(m) for m in m_levels]
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigurationError("m_levels must be a non-empty increasing list")
    dt = T / steps
    paths = inc.paths
    lvl_idx = np.zeros(paths, dtype=int)
    m_cur = np.full(paths, levels[0])

    def sheet(t, n, u):
        return truncated_power(gamma, m_cur)(u)

    prob = SKEProblem(grid, u0, "model", a=nu, sheet=sheet, basis=basis)
    _check_increments(prob, inc, steps, dt)
    stepper = Stepper(prob, dt)
    rec = _Recorder(grid, max(1, snapshot_stride), keep_fields)
    u = _initial_state(prob, paths)
    crossings: list[list[tuple[float, float]]] = [[] for _ in range(paths)]
    stopped = np.zeros(paths, dtype=bool)
    stop_time = np.full(paths, np.inf)
    for n in range(steps):
        t = n * dt
        rec(n, t, u)
        dW = inc.dW[:, n, :]
        new = stepper(u, n, dW)
        while True:
            peak = np.max(np.abs(new), axis=(-2, -1))
            crossed = (peak >= m_cur) & ~stopped
            if not crossed.any():
                break
            for p in np.flatnonzero(crossed):
                crossings[p].append((t + dt, m_cur[p]))
                if lvl_idx[p] + 1 < len(levels):
                    lvl_idx[p] += 1
                    m_cur[p] = levels[lvl_idx[p]]
                else:
                    stopped[p] = True
                    stop_time[p] = t + dt
            redo = crossed & ~stopped
            if redo.any():
                # same increments, larger level; only the affected paths are recomputed
                new[redo] = stepper(u, n, dW)[redo]
        frozen = stopped & (stop_time <= t)
        new[frozen] = u[frozen]
        u = new
        _guard(u, prob, n, t + dt)
    rec(steps, T, u, force=True)
    report = StoppingReport(levels, crossings, m_cur.copy(), stopped, stop_time, T)
    return rec.build(inc.seed, inc.stream_id, u), report


def krylov_auxiliary(a, sigma, c0: float):
    """``(2a - sigma sigma^T - c0 I)^(1/2)``: scalar/array entries, or symmetric matrices."""
    a = np.asarray(a, dtype=float)
    s = np.asarray(sigma, dtype=float)
    if a.ndim >= 2 and a.shape[-1] == a.shape[-2] and s.ndim >= 2:
        M = 2.0 * a - s @ np.swapaxes(s, -1, -2) - c0 * np.eye(a.shape[-1])
        w, V = np.linalg.eigh(M)
        if np.any(w < -1e-12):
            raise ConfigurationError("2a - sigma sigma^T - c0 I is not positive semi-definite")
        return (V * np.sqrt(np.clip(w, 0, None))[..., None, :]) @ np.swapaxes(V, -1, -2)
    M = 2.0 * a - s**2 - c0
    if np.any(M < -1e-12):
        raise ConfigurationError("2a - sigma^2 - c0 is negative")
    return np.sqrt(np.clip(M, 0.0, None))


def ito_wentzell_shift(fields: np.ndarray, grid: PhaseGrid, x_shift, v_shift) -> np.ndarray:
    """``w(x, v) = u(x - X, v + V)`` by exact Fourier translation.

    ``X`` is the time integral of the velocity shift and ``V`` the shift itself; both
    broadcast against the leading axes of ``fields``.
    """
    x_shift = np.asarray(x_shift, dtype=float)
    v_shift = np.asarray(v_shift, dtype=float)
    if np.any(np.abs(x_shift) > grid.Lx) or np.any(np.abs(v_shift) > grid.Lv):
        raise DomainError("shift exceeds the periodic box")
    return translate(fields, grid, -x_shift, v_shift)


def ito_wentzell_trajectory(traj: Trajectory, x_shift, v_shift) -> Trajectory:
    """Shift every snapshot; shifts are sampled at ``traj.times`` with shape ``(snapshots, paths)``."""
    if traj.fields is None:
        raise ConfigurationError("trajectory was recorded without fields")
    w = ito_wentzell_shift(traj.fields, traj.grid, x_shift, v_shift)
    diag = {k: [] for k in DIAGNOSTICS}
    for s in range(len(traj.times)):
        for k, val in diagnostics(w[s], traj.grid).items():
            diag[k].append(val)
    return Trajectory(traj.grid, traj.times.copy(), w, {k: np.array(v) for k, v in diag.items()},
                      traj.seed, traj.stream_id, w[-1])


class WeakFormMonitor:
    """Accumulates the discrete weak form for a basket of test functions.

    ``residual = <u_T, phi> - <u_0, phi> - sum_n [<u_n, L* phi> + <F_n, phi>] dt
                 - sum_n sum_k [<u_n, M_k* phi> + <G_n^k, phi>] dW^k_n``

    where ``L*`` and ``M_k*`` are the dual operators acting on the test functions and
    ``F``/``G`` are optional free terms.  Use it as a solver observer.
    """

    def __init__(self, grid: PhaseGrid, tests: np.ndarray, dual_drift: np.ndarray,
                 dual_noise: np.ndarray | None = None, dt: float = 1.0,
                 forcing: Callable | None = None, noise_forcing: Callable | None = None):
        self.grid = grid
        self.tests = np.asarray(tests)          # (m, Nx, Nv)
        self.dual_drift = np.asarray(dual_drift)
        self.dual_noise = None if dual_noise is None else np.asarray(dual_noise)  # (K, m, Nx, Nv)
        self.dt = dt
        self.forcing, self.noise_forcing = forcing, noise_forcing
        self.start = None
        self.acc = None
        self.residual = None

    def _pair(self, u, phi):
        return self.grid.cell * np.einsum("pij,mij->pm", u, phi)

    def __call__(self, n, t, u, dW):
        if self.start is None:
            self.start = self._pair(u, self.tests)
            self.acc = np.zeros_like(self.start)
        if dW is None:
            self.residual = self._pair(u, self.tests) - self.start - self.acc
            return
        inc = self._pair(u, self.dual_drift) * self.dt
        if self.forcing is not None:
            inc += self._pair(np.broadcast_to(self.forcing(t, n, u), u.shape), self.tests) * self.dt
        if self.dual_noise is not None:
            for k in range(self.dual_noise.shape[0]):
                inc += self._pair(u, self.dual_noise[k]) * dW[:, k][:, None]
        if self.noise_forcing is not None:
            G = self.noise_forcing(t, n, u)  # (p, K, Nx, Nv)
            inc += self.grid.cell * np.einsum("pkij,mij,pk->pm", G, self.tests, dW[:, : G.shape[1]])
        self.acc += inc


def bump_tests(grid: PhaseGrid, centers: Sequence[tuple[float, float]], widths: tuple[float, float]) -> np.ndarray:
    """Smooth compactly supported test functions ``exp(-1/(1 - r^2))`` on ellipses."""
    X, V = grid.mesh
    out = []
    for cx, cv in centers:
        r2 = ((X - cx) / widths[0]) ** 2 + ((V - cv) / widths[1]) ** 2
        phi = np.zeros_like(X)
        inside = r2 < 1
        phi[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        out.append(phi)
    return np.array(out)


@dataclass
class L1Report:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray
    margin: np.ndarray
    passed: bool


def l1_positive_check(traj: Trajectory, u0_pos_l1: float, forcing_pos_l1: Callable | None = None,
                      n_se: float = 3.0, floor: float = 0.0) -> L1Report:
    """Monte-Carlo check of ``E||u+(t)||_1 <= ||u0+||_1 + int_0^t ||f+||_1``.

    ``floor`` absorbs floating-point roundoff when both sides vanish.
    """
    pos = traj.diagnostics["pos_l1"]
    paths = pos.shape[1]
    mean = pos.mean(axis=1)
    se = pos.std(axis=1, ddof=1) / np.sqrt(paths) if paths > 1 else np.zeros_like(mean)
    extra = np.array([forcing_pos_l1(t) for t in traj.times]) if forcing_pos_l1 else 0.0
    bound = u0_pos_l1 + extra
    margin = bound + n_se * se + floor - mean
    return L1Report(traj.times, mean, se, bound + np.zeros_like(mean), margin, bool(np.all(margin >= 0)))
