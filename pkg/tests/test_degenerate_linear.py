"""
Tests for the weighted half-space solver, its s = -1 limit and the barriers
"""
import numpy as np
import pytest

from shared.models import BarrierId, DomainError, Grid, ScalarField, WeightedProblem
from shared.utils import (
    barrier_residual,
    c1alpha_fit,
    derive_params,
    half_grid,
    limit_pair_difference,
    limit_pair_sup,
    solve,
    solve_limit,
    solve_weighted,
    weighted_energy,
)


def _exact(s):
    return lambda *xs: xs[0] ** 2 - xs[-1] ** 2 / (1.0 + s)


class TestHalfGrid:
    def test_staggered_rows(self):
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        xn = grid.axes()[-1]
        assert xn[0] == pytest.approx(1.0 / 64)
        assert grid.shape == (33, 17)

    def test_problem_validation(self):
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        with pytest.raises(DomainError):
            WeightedProblem(grid, _exact(-0.5), s=-1.0)
        with pytest.raises(DomainError):
            WeightedProblem(Grid.from_spacing([(-0.5, 0.5), (0.0, 0.5)], 1.0 / 32), _exact(-0.5), -0.5)
        with pytest.raises(DomainError):
            WeightedProblem(Grid.from_spacing([(0.0, 1.0)], 1.0 / 32), _exact(-0.5), -0.5)
        with pytest.raises(DomainError):
            half_grid(3, 0.5, 0.5, 1.0 / 32)


class TestWeightedSolve:
    """Finite volumes for div(x_n^s grad v) = 0"""

    @pytest.mark.parametrize("s", [-0.5, -0.9, 0.0])
    def test_reproduces_quadratic(self, s):
        """x_1^2 - x_n^2/(1+s) is reproduced to solver precision"""
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        data = _exact(s)
        v = solve_weighted(WeightedProblem(grid, data, s), solve_tol=1e-12)
        error = np.max(np.abs(v.values - data(*grid.mesh())))
        assert error <= 5.0 * grid.h ** 2 / (1.0 + s)
        assert error < 1e-8

    def test_reproduces_linear(self):
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        v = solve_weighted(WeightedProblem(grid, lambda x, y: 1.0 + 2.0 * x, -0.5), solve_tol=1e-12)
        x, _ = grid.mesh()
        np.testing.assert_allclose(v.values, 1.0 + 2.0 * x, atol=1e-9)

    def test_three_dimensions(self):
        grid = half_grid(2, 0.5, 1.0, 1.0 / 16)
        data = _exact(-0.5)
        v = solve(WeightedProblem(grid, data, -0.5), solve_tol=1e-12)
        assert np.max(np.abs(v.values - data(*grid.mesh()))) < 1e-8

    def test_energy_is_minimal(self, rng):
        """Interior perturbations raise the discrete weighted energy"""
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        v = solve_weighted(WeightedProblem(grid, _exact(-0.5), -0.5), solve_tol=1e-12)
        bump = np.zeros(grid.shape)
        bump[1:-1, :-1] = 1e-2 * rng.standard_normal((grid.shape[0] - 2, grid.shape[1] - 1))
        assert weighted_energy(v, -0.5) < weighted_energy(v.with_values(v.values + bump), -0.5)

    def test_limit_problem_rejected(self):
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        with pytest.raises(DomainError):
            solve_weighted(WeightedProblem(grid, _exact(-0.5)))


class TestLimitSolve:
    """The s = -1 problem with a harmonic trace"""

    def test_reproduces_limit_solution(self):
        """x_1 + x_n^2 solves the limit equation with trace x_1"""
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        x, y = grid.mesh()
        v = solve_limit(WeightedProblem(grid, lambda x, y: x + y ** 2), solve_tol=1e-12)
        np.testing.assert_allclose(v.values, x + y ** 2, atol=1e-8)

    def test_weighted_approaches_limit(self):
        """As s decreases to -1 the weighted solution approaches the limit solution"""
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        x, y = grid.mesh()

        def data(x, y):
            return x + y ** 2

        errors = []
        for s in (-0.5, -0.999):
            v = solve(WeightedProblem(grid, data, s), solve_tol=1e-12)
            errors.append(np.max(np.abs(v.values - (x + y ** 2))))
        assert errors[1] < errors[0]

    def test_triple_converges_to_limit_output(self):
        """Outputs at s = -0.9, -0.99, -0.999 close in on the limit solve in max norm"""
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)

        def data(x, y):
            return x + y ** 2

        limit = solve_limit(WeightedProblem(grid, data), solve_tol=1e-12).values
        errors = []
        for s in (-0.9, -0.99, -0.999):
            v = solve_weighted(WeightedProblem(grid, data, s), solve_tol=1e-12)
            errors.append(np.max(np.abs(v.values - limit)))
        assert errors[0] > errors[1] > errors[2]

    def test_power_data_is_not_reproduced(self):
        """x_n^(1-s) solves the interior equation but carries unit weighted flux at x_n = 0"""
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        solve_tol = 1e-10

        def data(x, y):
            return y ** 1.5

        v = solve_weighted(WeightedProblem(grid, data, -0.5), solve_tol=solve_tol)
        _, y = grid.mesh()
        assert np.max(np.abs(v.values - y ** 1.5)) > 10.0 * solve_tol

    def test_weighted_problem_rejected(self):
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        with pytest.raises(DomainError):
            solve_limit(WeightedProblem(grid, _exact(-0.5), -0.5))


class TestBarriers:
    """Closed-form barrier residuals"""

    @pytest.mark.parametrize("s", [-0.5, -0.9, -0.99])
    @pytest.mark.parametrize("barrier", [BarrierId.Q1, BarrierId.Q2])
    def test_signs(self, rng, s, barrier):
        points = np.column_stack([rng.uniform(-0.5, 0.5, 200), rng.uniform(1e-4, 0.1, 200)])
        table = barrier_residual(s, barrier, points)
        assert list(table.columns) == ["x1", "x_n", "value", "residual", "sign", "weighted_flux"]
        assert (table["sign"] >= 0).all()

    @pytest.mark.parametrize("barrier", [BarrierId.Q1, BarrierId.Q2])
    def test_two_tangential_directions(self, rng, barrier):
        """In R^3 the barriers still solve the equation: every sign is zero"""
        points = np.column_stack([rng.uniform(-0.5, 0.5, 200), rng.uniform(-0.5, 0.5, 200),
                                  rng.uniform(1e-4, 0.1, 200)])
        table = barrier_residual(-0.9, barrier, points)
        assert list(table.columns)[:3] == ["x1", "x2", "x_n"]
        assert (table["sign"] == 0).all()

    def test_q1_value_in_three_dimensions(self):
        """q1 = c0/2 + C0 (-|x'|^2 + 2 x_n^2/(1+s) + x_n^(1-s)) with two tangential directions"""
        table = barrier_residual(-0.5, BarrierId.Q1, np.array([[0.1, 0.2, 0.25]]))
        expected = 0.05 + 10.0 * (-0.05 + 2.0 * 0.0625 / 0.5 + 0.25 ** 1.5)
        assert table["value"].iloc[0] == pytest.approx(expected, rel=1e-12)

    def test_q1_flux_at_bottom(self):
        """x_n^s d_n q1 tends to C0 (1 - s) at the singular line"""
        table = barrier_residual(-0.5, BarrierId.Q1, np.array([[0.0, 1e-6]]))
        assert table["weighted_flux"].iloc[0] == pytest.approx(10.0 * 1.5, rel=1e-2)

    def test_gamma_params_accepted(self):
        table = barrier_residual(derive_params(1.0), BarrierId.Q2, np.array([[0.1, 0.05]]))
        assert len(table) == 1

    def test_domain(self):
        with pytest.raises(DomainError):
            barrier_residual(-1.0, BarrierId.Q1, np.array([[0.0, 0.1]]))
        with pytest.raises(DomainError):
            barrier_residual(-0.5, BarrierId.Q1, np.array([[0.0, 0.0]]))

    def test_limit_pair(self):
        """The pair converges to x^2 log x linearly in 1 + s"""
        sups = [limit_pair_sup(s) for s in (-0.9, -0.99, -0.999)]
        assert sups[0] > sups[1] > sups[2]
        assert sups[1] < 0.02
        assert sups[1] / sups[0] == pytest.approx(0.1, rel=0.1)
        assert limit_pair_difference(-0.9, np.array([0.0]))[0] == 0.0

    def test_limit_pair_table(self):
        table = barrier_residual(-0.9, BarrierId.LIMIT_PAIR)
        assert list(table.columns) == ["x_n", "difference", "abs_difference"]
        assert len(table) == 10_001


class TestRegularityFit:
    def test_linear_trace(self):
        """Limit solution x_1 + x_n^2: slope 1 on the bottom row, C at most 1"""
        grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
        v = solve_limit(WeightedProblem(grid, lambda x, y: x + y ** 2), solve_tol=1e-12)
        fit = c1alpha_fit(v)
        assert fit.a_prime[0] == pytest.approx(1.0, abs=1e-6)
        assert 0.0 < fit.alpha_fit <= 1.0
        assert fit.C_fit <= 1.0 + 1e-6

    def test_needs_half_space(self, unit_interval):
        with pytest.raises(DomainError):
            c1alpha_fit(ScalarField(unit_interval, np.zeros(unit_interval.shape)))
