"""Tests for the least-squares Monte Carlo discrete-scheme oracle.

Reference values come from three independent routes: hand-computed design
matrices, closed-form conditional expectations (affine coefficient tables for
the linear benchmark, exact projections for Brownian martingales), and direct
re-computation of single regressions outside the sweep.
"""

import io
import math

import numpy as np
import pytest

from volterra.benchmarks import build_example1
from volterra.errors import ConfigError, InputError, ShapeError
from volterra.oracle import (
    DiscreteSolution,
    RegressionBasis,
    cell_values,
    conditional_expectation,
    diagonal_y,
    loglog_slope,
    oracle_convergence,
    solve_discrete,
    write_convergence_csv,
    write_oracle_csv,
)
from volterra.paths import PathBatch, TimeGrid, triangular_pairs
from volterra.rng import TAG_ORACLE, substream
from volterra.solver import BsvieProblem

# (2/pi)(e - 1): closed-form initial value of the linear benchmark, derived
# and frozen in test_benchmarks.py.
Y0_LINEAR = 1.0938921864969489


def _brownian_batch(grid, m_paths, seed):
    """Driftless unit-volatility paths (state = Brownian motion) plus the
    raw Brownian array [M, N+1]."""
    gen = substream(seed, TAG_ORACLE)
    incs = gen.normal(0.0, math.sqrt(grid.dt),
                      size=(m_paths, grid.n_steps, 1))
    brownian = np.concatenate(
        [np.zeros((m_paths, 1)), np.cumsum(incs[:, :, 0], axis=1)], axis=1)
    return PathBatch(grid, brownian[:, :, None], incs, seed=0), brownian


def _zero_generator(t, s, x_t, x_s, y, z):
    return np.zeros((x_t.shape[0], 1))


def _unit_problem(terminal, generator=_zero_generator):
    """1-d problem shell on Brownian state; drift/diffusion are unused by the
    regression sweep but required by the problem contract."""
    return BsvieProblem(
        state_dim=1, value_dim=1, noise_dim=1,
        drift=lambda t, x: np.zeros_like(x),
        diffusion=lambda t, x: np.ones(x.shape + (1,)),
        generator=generator, terminal=terminal,
        x0=np.zeros(1), horizon=1.0)


def _affine_scheme_tables(n_steps, horizon=1.0):
    """Exact conditional-expectation solution of the discrete sweep on the
    linear benchmark.

    With Brownian state, every cell value of the scheme is affine in the
    state: Y_l^{k} = a[k,l]·B_{t_l} + b[k,l] and Z_l^{k} = a[k,l+1], because
    E[B_{l+1}|B_l] = B_l and (1/dt)E[(a·B_{l+1}+b)ΔB|B_l] = a.  The backward
    recursion then closes over the coefficient tables; the diagonal uses the
    pre-update regression value in the generator's y-argument, matching the
    sweep's single fixed-point evaluation.
    """
    dt = horizon / n_steps
    t = np.arange(n_steps + 1) * dt
    a = np.zeros((n_steps, n_steps + 1))
    b = np.zeros((n_steps, n_steps + 1))
    a[:, n_steps] = np.sin(np.pi * t[:n_steps])
    for l in range(n_steps - 1, -1, -1):
        a[l, l] = a[l, l + 1] * (1.0 + dt)
        b[l, l] = b[l, l + 1] * (1.0 + dt) + dt * math.exp(t[l]) * a[l, l + 1]
        for k in range(l):
            kernel = math.exp(-(t[l] - t[k]))
            a[k, l] = a[k, l + 1] + dt * kernel * a[l, l]
            b[k, l] = (b[k, l + 1]
                       + dt * (kernel * b[l, l]
                               + math.exp(t[l]) * a[k, l + 1]))
    return a, b


@pytest.fixture(scope="module")
def linear_solution():
    """One shared linear-benchmark solve (N=10, M=2^15, degree 3) for the
    heavier cross-checks."""
    grid = TimeGrid(1.0, 10)
    batch, brownian = _brownian_batch(grid, 2 ** 15, 4242)
    problem = build_example1()
    solution = solve_discrete(problem, grid, batch, RegressionBasis(degree=3))
    return grid, batch, brownian, problem, solution


class TestRegressionBasis:
    def test_design_shape_and_intercept(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=7), rng.normal(size=7)
        design = RegressionBasis(degree=3).design(x, y)
        # 1 intercept + 2 linear + 3 quadratic + 4 cubic monomials
        assert design.shape == (7, 10)
        np.testing.assert_array_equal(design[:, 0], np.ones(7))

    def test_design_values_single_sample(self):
        design = RegressionBasis(degree=2).design(np.array([2.0]),
                                                  np.array([3.0]))
        # intercept, x, y, x², xy, y²
        np.testing.assert_array_equal(design[0],
                                      [1.0, 2.0, 3.0, 4.0, 6.0, 9.0])

    def test_no_interactions_pure_powers(self):
        design = RegressionBasis(degree=3, interactions=False).design(
            np.array([2.0]), np.array([3.0]))
        # intercept, x, y, x², y², x³, y³
        np.testing.assert_array_equal(design[0],
                                      [1.0, 2.0, 3.0, 4.0, 9.0, 8.0, 27.0])

    def test_degree_zero_is_intercept_only(self):
        design = RegressionBasis(degree=0).design(np.arange(5.0))
        np.testing.assert_array_equal(design, np.ones((5, 1)))

    def test_matrix_regressor_matches_stacked_vectors(self):
        rng = np.random.default_rng(1)
        xy = rng.normal(size=(6, 2))
        basis = RegressionBasis(degree=2)
        np.testing.assert_array_equal(basis.design(xy),
                                      basis.design(xy[:, 0], xy[:, 1]))

    def test_negative_degree_rejected(self):
        with pytest.raises(ConfigError):
            RegressionBasis(degree=-1)

    def test_bad_regressor_rank_rejected(self):
        with pytest.raises(ShapeError):
            RegressionBasis().design(np.zeros((2, 2, 2)))

    def test_no_regressors_rejected(self):
        with pytest.raises(InputError):
            RegressionBasis().design()


class TestConditionalExpectation:
    def test_constant_target_recovered(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=256)
        fitted = conditional_expectation(np.full(256, 3.25), x,
                                         RegressionBasis(degree=3))
        np.testing.assert_allclose(fitted, 3.25, rtol=0, atol=1e-12)

    def test_constant_regressor_gives_sample_mean(self):
        # an all-constant regressor collapses the design to the intercept
        rng = np.random.default_rng(3)
        targets = rng.normal(size=500)
        fitted = conditional_expectation(targets, np.full(500, 7.0),
                                         RegressionBasis(degree=3))
        np.testing.assert_allclose(fitted, targets.mean(), rtol=0, atol=1e-12)

    def test_in_span_function_recovered_exactly(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=512)
        target = 2.0 + 3.0 * x - x ** 2 + 0.5 * x ** 3
        fitted = conditional_expectation(target, x, RegressionBasis(degree=3))
        np.testing.assert_allclose(fitted, target, rtol=0, atol=1e-8)

    def test_joint_in_span_function_recovered(self):
        rng = np.random.default_rng(5)
        x1, x2 = rng.normal(size=400), rng.normal(size=400)
        target = 1.0 + x1 * x2 - x2 ** 2
        fitted = conditional_expectation(target, (x1, x2),
                                         RegressionBasis(degree=2))
        np.testing.assert_allclose(fitted, target, rtol=0, atol=1e-8)

    def test_brownian_martingale_projection(self):
        # E[B_T | B_s] = B_s; the regression error shrinks with sample size
        def projection_mse(m_paths, seed):
            rng = np.random.default_rng(seed)
            b_s = rng.normal(0.0, math.sqrt(0.25), size=m_paths)
            b_t = b_s + rng.normal(0.0, math.sqrt(0.75), size=m_paths)
            fitted = conditional_expectation(b_t, b_s,
                                             RegressionBasis(degree=3))
            return float(np.mean((fitted - b_s) ** 2))

        mse_small = projection_mse(2 ** 8, 6)
        mse_large = projection_mse(2 ** 14, 6)
        assert mse_large < 1e-3
        assert mse_small > 3.0 * mse_large

    def test_multi_column_targets_match_column_fits(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=300)
        targets = np.column_stack([np.sin(x), np.cos(x)])
        basis = RegressionBasis(degree=3)
        joint = conditional_expectation(targets, x, basis)
        for col in range(2):
            single = conditional_expectation(targets[:, col], x, basis)
            np.testing.assert_allclose(joint[:, col], single,
                                       rtol=0, atol=1e-12)

    def test_insufficient_samples_rejected(self):
        with pytest.raises(InputError):
            conditional_expectation(np.zeros(5),
                                    (np.zeros(5), np.ones(5) * 2),
                                    RegressionBasis(degree=3))

    def test_rank_deficient_design_warns_and_projects(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=200)
        target = 5.0 - 2.0 * x
        with pytest.warns(RuntimeWarning):
            fitted = conditional_expectation(target, (x, x),
                                             RegressionBasis(degree=1))
        np.testing.assert_allclose(fitted, target, rtol=0, atol=1e-4)

    def test_row_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            conditional_expectation(np.zeros(10), np.zeros(11),
                                    RegressionBasis(degree=1))

    def test_bad_target_rank_rejected(self):
        with pytest.raises(ShapeError):
            conditional_expectation(np.zeros((4, 2, 2)), np.zeros(4),
                                    RegressionBasis(degree=1))


class TestTriangularLayout:
    def _dummy_solution(self, n_steps):
        rows, cols = triangular_pairs(n_steps)
        n_pairs = rows.shape[0]
        y = np.arange(n_pairs, dtype=np.float64)[None, :, None] * np.ones(
            (3, 1, 1))
        z = y[..., None]
        return DiscreteSolution(grid=TimeGrid(1.0, n_steps),
                                basis=RegressionBasis(), y_values=y,
                                z_values=z, pair_rows=rows, pair_cols=cols)

    def test_cell_index_matches_enumeration(self):
        solution = self._dummy_solution(7)
        for pos, (k, l) in enumerate(zip(solution.pair_rows,
                                         solution.pair_cols)):
            assert solution.cell_index(int(k), int(l)) == pos
        assert solution.n_pairs == 7 * 8 // 2

    def test_cell_index_rejects_out_of_triangle(self):
        solution = self._dummy_solution(4)
        for k, l in [(1, 0), (0, 4), (-1, 0), (4, 4)]:
            with pytest.raises(InputError):
                solution.cell_index(k, l)

    def test_cell_values_and_diagonal_extraction(self):
        solution = self._dummy_solution(5)
        y_cell, z_cell = cell_values(solution, 1, 3)
        pos = solution.cell_index(1, 3)
        np.testing.assert_array_equal(y_cell, solution.y_values[:, pos])
        np.testing.assert_array_equal(z_cell, solution.z_values[:, pos])
        diag = diagonal_y(solution)
        assert diag.shape == (3, 5, 1)
        for k in range(5):
            np.testing.assert_array_equal(
                diag[:, k], solution.y_values[:, solution.cell_index(k, k)])


class TestSolveDiscrete:
    def test_constant_problem_is_exact(self):
        problem = _unit_problem(
            terminal=lambda t, x_t, x_term: np.full((x_t.shape[0], 1), 2.5))
        grid = TimeGrid(1.0, 6)
        batch, _ = _brownian_batch(grid, 512, 11)
        solution = solve_discrete(problem, grid, batch,
                                  RegressionBasis(degree=2))
        np.testing.assert_allclose(solution.y_values, 2.5, rtol=0, atol=1e-10)
        # residual-projected Z targets vanish identically for constants
        np.testing.assert_allclose(solution.z_values, 0.0, rtol=0, atol=1e-10)

    def test_brownian_terminal_martingale(self):
        # g = B_T, f = 0: Y_l^{k} = B_{t_l} and Z ≡ 1 for every cell
        problem = _unit_problem(terminal=lambda t, x_t, x_term: x_term.copy())
        grid = TimeGrid(1.0, 8)
        batch, brownian = _brownian_batch(grid, 2 ** 13, 55)
        solution = solve_discrete(problem, grid, batch,
                                  RegressionBasis(degree=3))
        b_cells = brownian[:, solution.pair_cols]
        y_rms = np.sqrt(np.mean((solution.y_values[:, :, 0] - b_cells) ** 2))
        z_rms = np.sqrt(np.mean((solution.z_values[:, :, 0, 0] - 1.0) ** 2))
        assert y_rms < 0.05
        assert z_rms < 0.12

    def test_final_stage_equals_direct_regression(self):
        # with f = 0 the last backward stage is a plain projection of the
        # terminal layer; recompute those regressions directly
        problem = _unit_problem(
            terminal=lambda t, x_t, x_term: x_term ** 2 + t * x_t)
        grid = TimeGrid(1.0, 5)
        batch, _ = _brownian_batch(grid, 1024, 12)
        basis = RegressionBasis(degree=2)
        solution = solve_discrete(problem, grid, batch, basis)

        states = batch.states
        x_last = states[:, 4, :]
        x_term = states[:, 5, :]
        last = grid.n_steps - 1
        for k in range(grid.n_steps):
            target = problem.terminal(grid.nodes[k], states[:, k, :], x_term)
            regs = x_last if k == last else (x_last, states[:, k, :])
            direct = conditional_expectation(target, regs, basis)
            y_cell, _ = cell_values(solution, k, last)
            np.testing.assert_array_equal(y_cell, direct)

    def test_grid_mismatch_rejected(self):
        problem = _unit_problem(
            terminal=lambda t, x_t, x_term: x_term.copy())
        batch, _ = _brownian_batch(TimeGrid(1.0, 4), 64, 13)
        with pytest.raises(ShapeError):
            solve_discrete(problem, TimeGrid(1.0, 8), batch)

    def test_linear_benchmark_matches_affine_recursion(self, linear_solution):
        grid, _, brownian, _, solution = linear_solution
        a, b = _affine_scheme_tables(grid.n_steps)
        y_exact = (a[solution.pair_rows, solution.pair_cols][None, :]
                   * brownian[:, solution.pair_cols]
                   + b[solution.pair_rows, solution.pair_cols][None, :])
        z_exact = a[solution.pair_rows, solution.pair_cols + 1]

        y_diff = solution.y_values[:, :, 0] - y_exact
        z_gap = solution.z_values[:, :, 0, 0].mean(axis=0) - z_exact
        assert np.sqrt(np.mean(y_diff ** 2)) < 0.03
        assert np.abs(z_gap).max() < 0.06
        assert np.sqrt(np.mean(z_gap ** 2)) < 0.025
        pos = solution.cell_index(0, 0)
        assert abs(y_diff[:, pos].mean()) < 0.02

    def test_basis_degree_insensitivity(self, linear_solution):
        # degree-2 and degree-3 fits agree closely on the linear benchmark
        grid, batch, _, problem, sol3 = linear_solution
        sol2 = solve_discrete(problem, grid, batch, RegressionBasis(degree=2))
        diag3 = diagonal_y(sol3)[:, :, 0].mean(axis=0)
        diag2 = diagonal_y(sol2)[:, :, 0].mean(axis=0)
        assert abs(diag2[0] - diag3[0]) / abs(diag3[0]) < 2e-2
        assert np.max(np.abs(diag2 - diag3) / np.abs(diag3)) < 2e-2

    def test_initial_value_approaches_closed_form(self):
        grid = TimeGrid(1.0, 20)
        batch, _ = _brownian_batch(grid, 2 ** 13, 7)
        solution = solve_discrete(build_example1(), grid, batch,
                                  RegressionBasis(degree=3))
        y0 = float(diagonal_y(solution)[:, 0, 0].mean())
        assert abs(y0 - Y0_LINEAR) / Y0_LINEAR < 0.1


class TestConvergenceStudy:
    def test_loglog_slope_recovers_power_law(self):
        x = np.array([0.2, 0.1, 0.05, 0.025])
        assert loglog_slope(x, 3.7 * x ** 1.8) == pytest.approx(1.8,
                                                                abs=1e-12)

    def test_refine_validated(self):
        with pytest.raises(ConfigError):
            oracle_convergence([4], 256, RegressionBasis(degree=2),
                               seed=1, refine=0)

    def test_gaps_decrease_with_resolution(self):
        results = oracle_convergence(
            [4, 8], 2 ** 11, RegressionBasis(degree=2), seed=99, refine=2)
        assert [row["N"] for row in results] == [4, 8]
        assert results[0]["dt"] == pytest.approx(0.25)
        assert results[1]["dt"] == pytest.approx(0.125)
        assert results[1]["err_y"] < results[0]["err_y"]
        assert results[1]["err_z"] < results[0]["err_z"]

    def test_y_gap_slope_lower_bound(self):
        # pinned study: N doubling from 5 to 40, 2^15 paths, cubic basis;
        # the cell-integrated Y gap must decay at least first order in a
        # log-log fit (the scheme is super-convergent here, so the slope
        # comfortably clears the bound)
        results = oracle_convergence(
            [5, 10, 20, 40], 2 ** 15, RegressionBasis(degree=3), seed=4242)
        dts = [row["dt"] for row in results]
        slope = loglog_slope(dts, [row["err_y"] for row in results])
        assert slope >= 0.7


class TestOracleCsv:
    def test_oracle_table_structure(self):
        problem = _unit_problem(
            terminal=lambda t, x_t, x_term: np.full((x_t.shape[0], 1), 2.5))
        grid = TimeGrid(1.0, 4)
        batch, _ = _brownian_batch(grid, 256, 14)
        solution = solve_discrete(problem, grid, batch,
                                  RegressionBasis(degree=1))
        buf = io.StringIO()
        write_oracle_csv(buf, solution)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "k,l,t_k,t_l,mean_Y,mean_Z"
        assert len(lines) == 1 + 4 * 5 // 2
        first = lines[1].split(",")
        assert (int(first[0]), int(first[1])) == (0, 0)
        assert float(first[4]) == pytest.approx(2.5, abs=1e-10)

    def test_convergence_table_round_trip(self):
        results = [{"N": 5, "dt": 0.2, "err_y": 0.125, "err_z": 1e-3},
                   {"N": 10, "dt": 0.1, "err_y": 1 / 3, "err_z": 2e-4}]
        buf = io.StringIO()
        write_convergence_csv(buf, results)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "N,dt,err_y,err_z"
        row = lines[2].split(",")
        assert int(row[0]) == 10
        assert float(row[2]) == 1 / 3
