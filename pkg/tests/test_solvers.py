import numpy as np
import pytest

from kinspde.errors import ConfigurationError, DomainError, InstabilityError
from kinspde.grid import Field, d_dv, d_dx, make_grid
from kinspde.noise import make_basis, make_increments
from kinspde.semigroup import KineticPropagator
from kinspde.solvers import (SKEProblem, Trajectory, WeakFormMonitor, bump_tests, diagnostics, ito_wentzell_shift,
                             ito_wentzell_trajectory, krylov_auxiliary, l1_positive_check, solve, solve_linear,
                             solve_nonlinear, solve_superlinear, step_model, truncated_power)


class TestProblemValidation:
    def test_unknown_form(self, grid, bump):
        with pytest.raises(ConfigurationError, match="unknown form"):
            SKEProblem(grid, bump, "weak")

    def test_model_form_restrictions(self, grid, bump):
        with pytest.raises(ConfigurationError):
            SKEProblem(grid, bump, "model", b=1.0)
        with pytest.raises(ConfigurationError):
            SKEProblem(grid, bump, "model", a=lambda t, n: 1.0)

    def test_sheet_needs_basis(self, grid, bump):
        with pytest.raises(ConfigurationError, match="basis"):
            SKEProblem(grid, bump, sheet=lambda t, n, u: u)

    def test_sheet_excludes_channels(self, grid, bump):
        with pytest.raises(ConfigurationError):
            SKEProblem(grid, bump, "nondivergence", sigma=[0.1], sheet=lambda t, n, u: u, basis=make_basis(grid))

    def test_parabolicity(self, grid, bump):
        with pytest.raises(ConfigurationError, match="super-parabolicity"):
            SKEProblem(grid, bump, "nondivergence", a=0.5, sigma=[1.0])
        with pytest.raises(ConfigurationError):
            SKEProblem(grid, bump, "nondivergence", a=1.0, sigma=[1.0], c0=1.5)

    def test_time_dependent_parabolicity_checked(self, grid, bump):
        prob = SKEProblem(grid, bump, "nondivergence", a=lambda t, n: 1.0 if n < 2 else 0.3, sigma=[1.0])
        inc = make_increments(0, 0, 1e-3, 4, 1)
        with pytest.raises(ConfigurationError, match="super-parabolicity"):
            solve(prob, 4e-3, 4, inc, check_stability=False)

    def test_shape_mismatch(self, grid):
        with pytest.raises(ConfigurationError):
            SKEProblem(grid, np.zeros((4, 4)))

    def test_stability_bound(self, grid, bump):
        prob = SKEProblem(grid, bump, "nondivergence", a=1.0, nu0=0.5)
        assert prob.dt_max() == pytest.approx(0.25 * grid.hv**2 / 0.5)
        with pytest.raises(ConfigurationError, match="stability"):
            solve(prob, 1.0, 2)

    def test_missing_or_mismatched_increments(self, grid, bump):
        prob = SKEProblem(grid, bump, sheet=lambda t, n, u: u, basis=make_basis(grid))
        with pytest.raises(ConfigurationError):
            solve(prob, 0.1, 10)
        with pytest.raises(ConfigurationError):
            solve(prob, 0.1, 10, make_increments(0, 0, 0.02, 10, 32))
        with pytest.raises(ConfigurationError):
            solve(prob, 0.1, 10, make_increments(0, 0, 0.01, 10, 8))


class TestModelEquation:
    # exact identities below need a box where the semigroup law holds to roundoff

    def test_free_evolution_is_semigroup(self, wide_grid):
        X, V = wide_grid.mesh
        u0 = np.exp(-X**2 - V**2)
        tr = solve(SKEProblem(wide_grid, u0), 0.5, 10, snapshot_stride=5)
        np.testing.assert_allclose(tr.final[0], KineticPropagator(wide_grid, 0.5).apply(u0), atol=1e-12)
        np.testing.assert_allclose(tr.times, [0.0, 0.25, 0.5])

    def test_constant_forcing_duhamel(self, wide_grid):
        X, V = wide_grid.mesh
        u0 = np.exp(-X**2 - V**2)
        tr = solve(SKEProblem(wide_grid, u0, f=lambda t, n, u: 0.3), 0.5, 10)
        np.testing.assert_allclose(tr.final[0], KineticPropagator(wide_grid, 0.5).apply(u0) + 0.15, atol=1e-12)

    def test_constant_additive_noise(self, wide_grid):
        g_ = wide_grid
        X, V = g_.mesh
        u0 = np.exp(-X**2 - V**2)
        amps = np.array([1.0, -0.5])

        def g(t, n, u):
            return np.broadcast_to(amps[None, :, None, None], (u.shape[0], 2) + g_.shape)

        inc = make_increments(1, 0, 0.05, 10, 2, paths=3)
        tr = solve(SKEProblem(g_, u0, g=g), 0.5, 10, inc)
        W = inc.dW.sum(axis=1) @ amps
        expected = KineticPropagator(g_, 0.5).apply(u0)[None] + W[:, None, None]
        np.testing.assert_allclose(tr.final, expected, atol=1e-12)

    def test_step_model_matches_solve(self, grid, bump):
        b = make_basis(grid)
        prob = SKEProblem(grid, bump, sheet=lambda t, n, u: 0.5 * u, basis=b)
        inc = make_increments(2, 0, 0.01, 1, b.N)
        one = step_model(Field(grid, bump), 0.0, 0.01, prob, inc.dW[0, 0])
        np.testing.assert_allclose(one.values, solve(prob, 0.01, 1, inc).final[0], atol=1e-14)

    def test_step_model_needs_model_form(self, grid, bump):
        prob = SKEProblem(grid, bump, "nondivergence")
        with pytest.raises(ConfigurationError):
            step_model(Field(grid, bump), 0.0, 0.01, prob)

    def test_guard(self, grid, bump):
        prob = SKEProblem(grid, bump, f=lambda t, n, u: 100.0, guard=5.0)
        with pytest.raises(InstabilityError, match="guard"):
            solve(prob, 0.5, 10)

    def test_deterministic_replay(self, grid, bump):
        b = make_basis(grid)
        prob = SKEProblem(grid, bump, sheet=lambda t, n, u: np.cos(u), basis=b)
        runs = [solve(prob, 0.2, 20, make_increments(4, 1, 0.01, 20, b.N, paths=2)).final for _ in range(2)]
        np.testing.assert_array_equal(*runs)


class TestGeneralForms:
    def test_residual_diffusion_first_order(self, grid, bump):
        prob = lambda: SKEProblem(grid, bump, "nondivergence", a=1.0, nu0=0.5)
        exact = KineticPropagator(grid, 0.5, nu=1.0).apply(bump)
        errs = [np.abs(solve(prob(), 0.5, n).final[0] - exact).max() for n in (64, 128, 256)]
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        np.testing.assert_allclose(orders, 1.0, atol=0.15)

    def test_divergence_form_conserves_mass(self, grid, bump):
        prob = SKEProblem(grid, bump, "divergence", a=lambda t, n: 1.0 + 0.2 * np.sin(grid.mesh[1]) ** 2,
                          b=0.5 * np.tanh(grid.mesh[1]), sigma=[0.5], nu0=1.0)
        inc = make_increments(0, 0, 2e-3, 100, 1, paths=4)
        tr = solve(prob, 0.2, 100, inc, snapshot_stride=10)
        drift = np.abs(tr.diagnostics["mass"] - tr.diagnostics["mass"][0]).max()
        assert drift < 1e-8 * 0.2 * tr.diagnostics["mass"][0].max()

    def test_divergence_form_positive_without_gradient_noise(self, grid, bump):
        prob = SKEProblem(grid, bump, "divergence", a=1.0, b=0.5 * np.tanh(grid.mesh[1]))
        tr = solve(prob, 0.2, 50)
        assert tr.final.min() >= -1e-8

    def test_picard_agrees_to_first_order(self, grid, bump):
        exact = np.exp(-0.5) * KineticPropagator(grid, 0.5).apply(bump)
        for picard in (0, 3):
            errs = []
            for n in (20, 40):
                prob = SKEProblem(grid, bump, f=lambda t, n, u: -u)
                errs.append(np.abs(solve_nonlinear(prob, 0.5, n, picard=picard).final[0] - exact).max())
            assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.2)

    def test_solve_linear_alias(self, grid, bump):
        tr = solve_linear(SKEProblem(grid, bump), 0.1, 2, keep_fields=True)
        assert tr.fields.shape[1:] == (1,) + grid.shape
        assert tr.field(0).values.shape == grid.shape


class TestSuperlinear:
    def test_truncated_power(self):
        gm = truncated_power(0.1, np.array([1.0, 4.0]))
        u = np.full((2, 2, 2), 2.0)
        out = gm(u)
        np.testing.assert_allclose(out[0], 1.0)
        np.testing.assert_allclose(out[1], 2.0**1.1)

    def test_patching_equals_direct_run(self, grid):
        X, V = grid.mesh
        u0 = 1.8 * np.exp(-X**2 - V**2)
        b = make_basis(grid)
        inc = make_increments(9, 0, 0.005, 100, b.N, paths=16)
        patched, rep = solve_superlinear(grid, u0, 0.1, [2.0, 4.0, 8.0], 0.5, 100, inc, b)
        direct, _ = solve_superlinear(grid, u0, 0.1, [4.0, 8.0], 0.5, 100, inc, b)
        assert any(rep.crossings)
        np.testing.assert_array_equal(patched.final, direct.final)

    def test_stopped_paths_are_frozen(self, grid):
        X, V = grid.mesh
        b = make_basis(grid)
        inc = make_increments(1, 0, 0.005, 40, b.N, paths=4)
        tr, rep = solve_superlinear(grid, 1.8 * np.exp(-X**2 - V**2), 0.1, [1.0], 0.2, 40, inc, b,
                                    snapshot_stride=1)
        assert rep.any_stopped and np.all(rep.stopped)
        for p in range(4):
            k = int(np.searchsorted(tr.times, rep.stop_time[p]))
            np.testing.assert_array_equal(tr.diagnostics["l1"][k:, p], tr.diagnostics["l1"][-1, p])

    @pytest.mark.parametrize("gamma,levels", [(0.2, [2.0]), (0.1, [2.0, 1.0]), (0.1, [])])
    def test_invalid(self, grid, bump, gamma, levels):
        b = make_basis(grid)
        with pytest.raises(ConfigurationError):
            solve_superlinear(grid, bump, gamma, levels, 0.1, 10, make_increments(0, 0, 0.01, 10, b.N), b)


class TestItoWentzell:
    def test_krylov_scalar_and_matrix(self):
        assert krylov_auxiliary(1.0, 0.5, 1.0) == pytest.approx(np.sqrt(0.75))
        a = np.array([[1.0, 0.2], [0.2, 1.5]])
        s = np.array([[0.5, 0.0], [0.1, 0.3]])
        A = krylov_auxiliary(a, s, 0.5)
        np.testing.assert_allclose(A @ A, 2 * a - s @ s.T - 0.5 * np.eye(2), atol=1e-12)
        with pytest.raises(ConfigurationError):
            krylov_auxiliary(0.1, 1.0, 0.0)

    def test_linear_shift(self, grid, bump):
        X, V = grid.mesh
        t, e = 0.5, 0.8
        w = ito_wentzell_shift(bump, grid, 0.5 * t**2 * e, t * e)
        np.testing.assert_allclose(w, np.exp(-(X - 0.5 * t**2 * e) ** 2 - (V + t * e) ** 2), atol=1e-10)
        with pytest.raises(DomainError):
            ito_wentzell_shift(bump, grid, 2 * grid.Lx, 0.0)

    def test_trajectory_shift(self, grid, bump):
        tr = solve(SKEProblem(grid, bump), 0.1, 4, snapshot_stride=2)
        zero = np.zeros((3, 1))
        shifted = ito_wentzell_trajectory(tr, zero, zero)
        np.testing.assert_allclose(shifted.fields, tr.fields, atol=1e-13)
        with pytest.raises(ConfigurationError):
            ito_wentzell_trajectory(solve(SKEProblem(grid, bump), 0.1, 4, keep_fields=False), zero, zero)


class TestWeakForm:
    def test_bump_tests(self, grid):
        phi = bump_tests(grid, [(0.0, 0.0), (1.0, -1.0)], (1.0, 1.0))
        assert phi.shape == (2,) + grid.shape
        assert phi[0].max() == pytest.approx(1.0)
        X, V = grid.mesh
        assert np.all(phi[0][X**2 + V**2 >= 1] == 0)

    def test_deterministic_residual_first_order(self, wide_grid):
        g = wide_grid
        X, V = g.mesh
        u0 = np.exp(-X**2 - V**2)
        tests = bump_tests(g, [(0.0, 0.0), (0.5, 0.5)], (2.0, 2.0))
        dual = d_dv(tests, g, 2) - V * d_dx(tests, g, 1)
        res = []
        for n in (25, 50):
            mon = WeakFormMonitor(g, tests, dual, dt=0.5 / n)
            solve(SKEProblem(g, u0), 0.5, n, observer=mon)
            res.append(np.abs(mon.residual).max())
        assert res[0] / res[1] == pytest.approx(2.0, rel=0.2)


class TestDiagnostics:
    def test_values(self, grid):
        u = np.stack([np.full(grid.shape, -1.0), np.full(grid.shape, 2.0)])
        d = diagnostics(u, grid)
        area = 4 * grid.Lx * grid.Lv
        np.testing.assert_allclose(d["mass"], [-area, 2 * area])
        np.testing.assert_allclose(d["pos_l1"], [0.0, 2 * area])
        np.testing.assert_allclose(d["linf"], [1.0, 2.0])

    def test_trajectory_rejects_unsorted_times(self, grid):
        with pytest.raises(ValueError):
            Trajectory(grid, np.array([0.0, 0.0]), None, {})

    def test_l1_check_floor(self, grid):
        pos = np.array([[0.0, 0.0], [1e-12, 2e-12]])
        tr = Trajectory(grid, np.array([0.0, 1.0]), None, {"pos_l1": pos})
        assert not l1_positive_check(tr, 0.0).passed
        assert l1_positive_check(tr, 0.0, floor=1e-10).passed
