import numpy as np
import pytest

from kinspde.errors import ConfigurationError, DomainError
from kinspde.grid import Field, make_grid
from kinspde.noise import (lift_G, make_basis, make_generator, make_increments, noise_field, sheet_value,
                           walsh_integral)


class TestBasis:
    @pytest.mark.parametrize("kind,N", [("trigonometric", 32), ("trigonometric", 7), ("haar", 64), ("haar", 10)])
    def test_orthonormal(self, grid, kind, N):
        b = make_basis(grid, N, kind)
        np.testing.assert_allclose(b.gram(), np.eye(N), atol=1e-12)

    def test_default_size(self, grid):
        assert make_basis(grid).N == grid.Nv // 2

    @pytest.mark.parametrize("kind,N", [("trigonometric", 33), ("haar", 65), ("trigonometric", 0)])
    def test_size_limits(self, grid, kind, N):
        with pytest.raises(ConfigurationError):
            make_basis(grid, N, kind)

    def test_unknown_kind(self, grid):
        with pytest.raises(ConfigurationError, match="unknown basis"):
            make_basis(grid, 4, "wavelet")

    def test_antiderivative_of_constant(self, grid):
        b = make_basis(grid, 3)
        np.testing.assert_allclose(b.antiderivative()[0], grid.v / np.sqrt(2 * grid.Lv), atol=1e-14)

    def test_project_recovers_coefficients(self, grid):
        b = make_basis(grid, 9)
        c = np.arange(9.0)
        np.testing.assert_allclose(b.project(c @ b.eta), c, atol=1e-12)


class TestIncrements:
    def test_reproducible_per_stream(self):
        a = make_increments(5, 3, 0.1, 20, 4, paths=2)
        b = make_increments(5, 3, 0.1, 20, 4, paths=2)
        c = make_increments(5, 4, 0.1, 20, 4, paths=2)
        np.testing.assert_array_equal(a.dW, b.dW)
        assert not np.array_equal(a.dW, c.dW)
        assert a.dW.shape == (2, 20, 4) and (a.paths, a.steps, a.N) == (2, 20, 4)

    def test_generator_independent_of_prior_draws(self):
        g1 = make_generator(1, 2)
        g1.random(1000)
        assert make_generator(1, 2).random() != g1.random()
        assert make_generator(1, 2).random() == make_generator(1, 2).random()

    def test_variance(self):
        inc = make_increments(0, 0, 0.01, 1000, 50)
        assert inc.dW.var() == pytest.approx(0.01, rel=0.03)

    def test_brownian_and_coarsen(self):
        inc = make_increments(1, 0, 0.1, 8, 2, paths=3)
        W = inc.brownian()
        assert W.shape == (3, 9, 2) and np.all(W[:, 0] == 0)
        c = inc.coarsen(4)
        assert c.dt == pytest.approx(0.4)
        np.testing.assert_allclose(c.brownian()[:, -1], W[:, -1], atol=1e-14)
        with pytest.raises(ConfigurationError):
            inc.coarsen(3)
        assert inc.select(slice(1, 2)).paths == 1

    @pytest.mark.parametrize("args", [(0.0, 4, 1), (0.1, 0, 1), (0.1, 4, 0)])
    def test_invalid(self, args):
        with pytest.raises(ConfigurationError):
            make_increments(0, 0, *args)

    def test_increments_read_only(self):
        inc = make_increments(0, 0, 0.1, 2, 2)
        with pytest.raises(ValueError):
            inc.dW[0, 0, 0] = 1.0


class TestSheet:
    def test_starts_at_zero(self, grid):
        b = make_basis(grid)
        inc = make_increments(0, 0, 0.1, 4, b.N, paths=2)
        np.testing.assert_array_equal(sheet_value(inc, b, 0), 0.0)
        np.testing.assert_allclose(sheet_value(inc, b, 3, 0.0), 0.0, atol=1e-15)
        with pytest.raises(DomainError):
            sheet_value(inc, b, 5)

    def test_covariance(self):
        g = make_grid(2.0, 2.0, 8, 1024)
        b = make_basis(g)
        inc = make_increments(3, 0, 0.5, 2, b.N, paths=4000)
        B1 = sheet_value(inc, b, 1, 0.5)
        B2 = sheet_value(inc, b, 2, 1.0)
        prod = B1 * B2
        exact = 0.5 * 0.5
        assert abs(prod.mean() - exact) <= 5 * prod.std(ddof=1) / np.sqrt(prod.size)

    def test_noise_field_is_expansion(self, grid):
        b = make_basis(grid, 5)
        row = np.array([[1.0, 0, 0, 0, 2.0]])
        np.testing.assert_allclose(noise_field(row, b)[0], b.eta[0] + 2 * b.eta[4])

    def test_size_mismatch(self, grid):
        b = make_basis(grid, 4)
        inc = make_increments(0, 0, 0.1, 2, 3)
        with pytest.raises(ConfigurationError):
            sheet_value(inc, b, 1)


class TestLift:
    def test_pointwise_norm_odd_trig(self, grid, bump):
        N = 9
        b = make_basis(grid, N)
        G = lift_G(Field(grid, bump), b)
        # sum_k eta_k^2 = N / (2 Lv) for an odd-length trigonometric family
        np.testing.assert_allclose(G.pointwise_norm(), np.abs(bump) * np.sqrt(N / (2 * grid.Lv)), atol=1e-12)

    def test_truncation(self, grid, bump):
        b = make_basis(grid, 8)
        assert lift_G(Field(grid, bump), b, 3).components.shape == (3,) + grid.shape
        with pytest.raises(DomainError):
            lift_G(Field(grid, bump), b, 9)

    def test_walsh_integral_of_basis_function(self, grid):
        b = make_basis(grid, 6)
        inc = make_increments(2, 0, 0.1, 10, 6, paths=4)
        total = walsh_integral(lambda t: b.eta[2], inc, b)
        np.testing.assert_allclose(total, inc.dW[:, :, 2].sum(axis=1), atol=1e-12)
