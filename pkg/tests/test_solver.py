"""Tests for the backward training sweep.

The load-bearing check is a finite-difference gradient test of the full
step loss (prediction vs discrete residual), which exercises the chain rule
through the generator's y- and z-arguments — the part not covered by the
network-level gradient tests.  Training-quality checks use tiny problems
with known fixed points.
"""

import io
import math

import numpy as np
import pytest

from volterra import backend, nets
from volterra.benchmarks import analytic_y_ex1, analytic_z_ex1, build_example1
from volterra.errors import ConfigError, ContractError, InputError, TrainingError
from volterra.paths import (PathBatch, TimeGrid, brownian_increments,
                            simulate_euler, simulate_gbm_exact)
from volterra.solver import (
    BsvieProblem,
    SolverConfig,
    TrainedSolution,
    _StepContext,
    evaluate,
    evaluation_batch,
    load_solution,
    residual,
    save_solution,
    simulate_problem_paths,
    step_loss,
    train,
    validate_problem,
)


def _coupled_problem(with_partials=True):
    """2-d value / 2-d noise problem with y- and z-dependent generator,
    including cross-component y coupling, to exercise every gradient path."""

    def terminal(t, x_t, x_term):
        return 0.3 * x_t + np.sin(x_term)

    def generator(t, s, x_t, x_s, y, z):
        cross = 0.1 * y[:, ::-1] ** 2
        return (0.5 * np.tanh(y) + cross + 0.3 * np.sin(z).sum(axis=2)
                + 0.05 * x_t * x_s)

    def generator_dy(t, s, x_t, x_s, y, z):
        m_paths = y.shape[0]
        dfdy = np.zeros((m_paths, 2, 2))
        sech2 = 1.0 - np.tanh(y) ** 2
        for a in range(2):
            dfdy[:, a, a] = 0.5 * sech2[:, a]
            dfdy[:, a, 1 - a] = 0.2 * y[:, 1 - a]
        return dfdy

    def generator_dz(t, s, x_t, x_s, y, z):
        m_paths = y.shape[0]
        dfdz = np.zeros((m_paths, 2, 2, 2))
        for a in range(2):
            dfdz[:, a, a, :] = 0.3 * np.cos(z[:, a, :])
        return dfdz

    return BsvieProblem(
        state_dim=2, value_dim=2, noise_dim=2,
        drift=lambda t, x: np.zeros_like(x),
        diffusion=lambda t, x: np.broadcast_to(np.eye(2), x.shape + (2,)),
        generator=generator, terminal=terminal,
        x0=np.zeros(2), horizon=1.0,
        generator_dy=generator_dy if with_partials else None,
        generator_dz=generator_dz if with_partials else None)


def _constant_problem(level=0.7):
    return BsvieProblem(
        state_dim=1, value_dim=1, noise_dim=1,
        drift=lambda t, x: np.zeros_like(x),
        diffusion=lambda t, x: np.ones(x.shape + (1,)),
        generator=lambda t, s, x_t, x_s, y, z: np.zeros_like(y),
        terminal=lambda t, x_t, x_term: np.full((x_t.shape[0], 1), level),
        x0=np.zeros(1), horizon=1.0,
        generator_dy=lambda t, s, x_t, x_s, y, z: np.zeros(
            (y.shape[0], 1, 1)),
        generator_dz=lambda t, s, x_t, x_s, y, z: np.zeros(
            (y.shape[0], 1, 1, 1)))


def _brownian_paths(grid, m_paths, seed, state_dim=1):
    incs = brownian_increments(grid, m_paths, state_dim, seed)
    states = np.concatenate(
        [np.zeros((m_paths, 1, state_dim)), np.cumsum(incs, axis=1)], axis=1)
    return PathBatch(grid, states, incs, seed=seed)


class TestStepGradients:
    def _gradcheck(self, problem, z_offset=0, eps=1e-6):
        grid = TimeGrid(1.0, 3)
        n, m_paths = 1, 16
        r = grid.n_steps - n
        nd, mv, d = problem.state_dim, problem.value_dim, problem.noise_dim
        rng = np.random.default_rng(42)
        states = 0.5 * rng.normal(size=(m_paths, grid.n_steps + 1, nd))
        incs = math.sqrt(grid.dt) * rng.normal(size=(m_paths,
                                                     grid.n_steps, d))
        paths = PathBatch(grid, states, incs, seed=0)
        y_fut = [rng.normal(size=(m_paths, mv)) for _ in range(r - 1)]

        y_dims = [1 + nd, 5, 5, mv]
        z_dims = [2 + 2 * nd, 5, 5, mv * d]
        y_net = nets.init_net(y_dims, (7, 0))
        z_net = nets.init_net(z_dims, (7, 1))
        ws_y = backend.Workspace(y_dims, m_paths)
        ws_z = backend.Workspace(z_dims, r * m_paths)
        ctx = _StepContext(problem, grid, n, paths, y_fut, ws_y, ws_z,
                           z_offset)

        _, y_grads, z_grads = ctx.loss_and_grads(y_net, z_net)
        analytic = [[g.copy() for g in y_grads[0]],
                    [g.copy() for g in y_grads[1]],
                    [g.copy() for g in z_grads[0]],
                    [g.copy() for g in z_grads[1]]]
        param_groups = [y_net.weights, y_net.biases,
                        z_net.weights, z_net.biases]

        worst = 0.0
        for group, grads in zip(param_groups, analytic):
            for arr, grad in zip(group, grads):
                flat = arr.ravel()
                grad_flat = grad.ravel()
                for idx in range(flat.size):
                    orig = flat[idx]
                    flat[idx] = orig + eps
                    up = ctx.loss_and_grads(y_net, z_net)[0]
                    flat[idx] = orig - eps
                    down = ctx.loss_and_grads(y_net, z_net)[0]
                    flat[idx] = orig
                    fd = (up - down) / (2 * eps)
                    rel = abs(fd - grad_flat[idx]) / max(
                        1.0, abs(fd), abs(grad_flat[idx]))
                    worst = max(worst, rel)
        return worst

    def test_gradients_match_finite_differences(self):
        assert self._gradcheck(_coupled_problem()) < 1e-5

    def test_gradients_with_fallback_partials(self):
        # no analytic generator partials: the internal finite-difference
        # fallback must still produce gradients matching parameter FD
        assert self._gradcheck(_coupled_problem(with_partials=False)) < 1e-5

    def test_gradients_on_right_kernel_grid(self):
        assert self._gradcheck(_coupled_problem(), z_offset=1) < 1e-5


class TestResidual:
    def test_zero_generator_residual(self):
        grid = TimeGrid(1.0, 3)
        m_paths = 32
        paths = _brownian_paths(grid, m_paths, 21)
        problem = _constant_problem(0.0)
        n, r = 1, 2
        rng = np.random.default_rng(1)
        y_future = rng.normal(size=(r, m_paths, 1))
        z_row = rng.normal(size=(r, m_paths, 1, 1))
        got = residual(problem, paths, n, y_future, z_row)
        expected = np.zeros((m_paths, 1))
        for j in range(m_paths):
            acc = 0.0
            for i in range(r):
                acc += z_row[i, j, 0, 0] * paths.increments[j, n + i, 0]
            expected[j, 0] = 0.0 - acc   # terminal level is zero
        np.testing.assert_allclose(got, expected, rtol=0, atol=1e-14)

    def test_single_step_residual(self):
        grid = TimeGrid(1.0, 4)
        m_paths = 16
        paths = _brownian_paths(grid, m_paths, 22)
        problem = build_example1()
        n = 3
        rng = np.random.default_rng(2)
        y_future = rng.normal(size=(1, m_paths, 1))
        z_row = rng.normal(size=(1, m_paths, 1, 1))
        got = residual(problem, paths, n, y_future, z_row)
        t_n = grid.nodes[n]
        x_n = paths.states[:, n, :]
        g_vals = problem.terminal(t_n, x_n, paths.states[:, 4, :])
        f_vals = problem.generator(t_n, t_n, x_n, x_n, y_future[0],
                                   z_row[0])
        expected = (g_vals + grid.dt * f_vals
                    - z_row[0, :, :, 0] * paths.increments[:, n, :])
        np.testing.assert_allclose(got, expected, rtol=1e-14, atol=1e-14)

    def test_analytic_solution_residual_shrinks(self):
        # substituting the closed-form (Y, Z) of the linear benchmark for
        # the networks leaves only the time-discretization residual, which
        # must shrink as the grid refines
        problem = build_example1()
        losses = []
        for big_n in (8, 16, 32):
            grid = TimeGrid(1.0, big_n)
            paths = _brownian_paths(grid, 2 ** 12, 23)
            brownian = paths.states[:, :, 0]
            total = 0.0
            for n in range(big_n):
                r = big_n - n
                y_future = np.empty((r, paths.n_paths, 1))
                z_row = np.empty((r, paths.n_paths, 1, 1))
                for i in range(r):
                    t_m = grid.nodes[n + i]
                    y_future[i, :, 0] = analytic_y_ex1(t_m, brownian[:, n + i])
                    z_row[i, :, 0, 0] = analytic_z_ex1(grid.nodes[n], t_m)
                resid = residual(problem, paths, n, y_future, z_row)
                y_n = analytic_y_ex1(grid.nodes[n], brownian[:, n])[:, None]
                total += step_loss(y_n, resid)
            losses.append(total / big_n)
        assert losses[1] < 0.8 * losses[0]
        assert losses[2] < 0.8 * losses[1]

    def test_residual_contract_errors(self):
        grid = TimeGrid(1.0, 3)
        paths = _brownian_paths(grid, 8, 24)
        problem = _constant_problem()
        with pytest.raises(ContractError):
            residual(problem, paths, 5, np.zeros((1, 8, 1)),
                     np.zeros((1, 8, 1, 1)))
        with pytest.raises(ContractError):
            residual(problem, paths, 1, np.zeros((1, 8, 1)),
                     np.zeros((2, 8, 1, 1)))

    def test_step_loss_matches_naive_loop(self):
        rng = np.random.default_rng(3)
        y_pred = rng.normal(size=(100, 3))
        resid = rng.normal(size=(100, 3))
        naive = math.fsum((y_pred[j, b] - resid[j, b]) ** 2
                          for j in range(100) for b in range(3)) / 100
        assert step_loss(y_pred, resid) == pytest.approx(naive, rel=1e-12)

    def test_step_loss_validation(self):
        with pytest.raises(ContractError):
            step_loss(np.zeros((4, 1)), np.zeros((5, 1)))
        with pytest.raises(InputError):
            step_loss(np.full((4, 1), np.nan), np.zeros((4, 1)))


@pytest.fixture(scope="module")
def constant_run():
    config = SolverConfig(n_steps=3, n_paths=256, epochs=200,
                          hidden_layers=2, hidden_width=7,
                          learning_rate=1e-2, seed=5, path_mode="frozen")
    problem = _constant_problem(0.7)
    return problem, config, train(problem, config)


class TestTraining:
    def test_constant_problem_converges(self, constant_run):
        problem, config, solution = constant_run
        paths = evaluation_batch(problem, config)
        y_hat, z_hat = evaluate(solution, paths)
        assert float(np.mean((y_hat - 0.7) ** 2)) < 5e-4
        assert float(np.abs(y_hat - 0.7).max()) < 0.15
        assert float(np.mean(z_hat ** 2)) < 5e-4
        assert solution.training_losses[0][-1] < 1e-3

    def test_loss_curve_shape(self, constant_run):
        _, config, solution = constant_run
        assert len(solution.training_losses) == config.n_steps
        assert all(len(curve) == config.epochs
                   for curve in solution.training_losses)

    def test_frozen_loss_moving_average_non_increasing(self, constant_run):
        _, _, solution = constant_run
        window = 20
        for curve in solution.training_losses:
            curve = np.asarray(curve)
            ma = np.convolve(curve, np.ones(window) / window, mode="valid")
            upticks = np.diff(ma) / ma[:-1]
            assert upticks.max() <= 1e-6
            assert ma[-1] < ma[0]

    def test_training_is_deterministic(self):
        config = SolverConfig(n_steps=2, n_paths=64, epochs=4,
                              hidden_layers=2, hidden_width=5, seed=11,
                              path_mode="fresh")
        problem = _constant_problem()
        first = train(problem, config)
        second = train(problem, config)
        for net_a, net_b in zip(first.y_nets + first.z_nets,
                                second.y_nets + second.z_nets):
            for w_a, w_b in zip(net_a.weights, net_b.weights):
                np.testing.assert_array_equal(w_a, w_b)
        assert first.training_losses == second.training_losses

    def test_divergence_raises_training_error(self):
        blow_up = BsvieProblem(
            state_dim=1, value_dim=1, noise_dim=1,
            drift=lambda t, x: np.zeros_like(x),
            diffusion=lambda t, x: np.ones(x.shape + (1,)),
            generator=lambda t, s, x_t, x_s, y, z: 1e200 * y,
            terminal=lambda t, x_t, x_term: x_term.copy(),
            x0=np.zeros(1), horizon=1.0,
            generator_dy=lambda t, s, x_t, x_s, y, z: np.full(
                (y.shape[0], 1, 1), 1e200),
            generator_dz=lambda t, s, x_t, x_s, y, z: np.zeros(
                (y.shape[0], 1, 1, 1)))
        config = SolverConfig(n_steps=3, n_paths=32, epochs=5,
                              hidden_layers=2, hidden_width=5, seed=1,
                              path_mode="frozen")
        with np.errstate(over="ignore"), pytest.raises(TrainingError) as info:
            train(blow_up, config)
        err = info.value
        assert err.step == 2
        assert err.last_state is not None
        assert "y_net" in err.last_state and "z_net" in err.last_state

    def test_warm_start_and_right_grid_run(self):
        config = SolverConfig(n_steps=3, n_paths=64, epochs=4,
                              hidden_layers=2, hidden_width=5, seed=13,
                              path_mode="frozen", warm_start=True,
                              z_grid="right")
        problem = _constant_problem()
        solution = train(problem, config)
        paths = evaluation_batch(problem, config)
        y_hat, z_hat = evaluate(solution, paths)
        assert y_hat.shape == (64, 3, 1)
        assert z_hat.shape == (64, 6, 1, 1)
        assert np.isfinite(y_hat).all() and np.isfinite(z_hat).all()


@pytest.fixture(scope="module")
def small_run():
    config = SolverConfig(n_steps=4, n_paths=128, epochs=6,
                          hidden_layers=2, hidden_width=7, seed=17,
                          path_mode="frozen", m_eval=64)
    problem = build_example1()
    return problem, config, train(problem, config)


class TestEvaluationAndSerialization:
    def test_evaluate_shapes_and_purity(self, small_run):
        problem, config, solution = small_run
        paths = evaluation_batch(problem, config)
        y_a, z_a = evaluate(solution, paths)
        y_b, z_b = evaluate(solution, paths)
        assert y_a.shape == (64, 4, 1)
        assert z_a.shape == (64, 10, 1, 1)
        np.testing.assert_array_equal(y_a, y_b)
        np.testing.assert_array_equal(z_a, z_b)

    def test_evaluate_grid_mismatch_rejected(self, small_run):
        problem, config, solution = small_run
        other = _brownian_paths(TimeGrid(1.0, 5), 8, 1)
        with pytest.raises(ContractError):
            evaluate(solution, other)
        wrong_dim = _brownian_paths(TimeGrid(1.0, 4), 8, 1, state_dim=2)
        with pytest.raises(ContractError):
            evaluate(solution, wrong_dim)

    def test_serialization_round_trip_bit_exact(self, small_run):
        problem, config, solution = small_run
        buf = io.StringIO()
        save_solution(solution, buf)
        buf.seek(0)
        loaded = load_solution(buf)
        for net_a, net_b in zip(loaded.y_nets + loaded.z_nets,
                                solution.y_nets + solution.z_nets):
            for w_a, w_b in zip(net_a.weights, net_b.weights):
                np.testing.assert_array_equal(w_a, w_b)
            for b_a, b_b in zip(net_a.biases, net_b.biases):
                np.testing.assert_array_equal(b_a, b_b)
        paths = evaluation_batch(problem, config)
        np.testing.assert_array_equal(evaluate(loaded, paths)[0],
                                      evaluate(solution, paths)[0])

    def test_unknown_format_rejected(self):
        with pytest.raises(ConfigError):
            load_solution(io.StringIO('{"format": "other"}'))

    def test_solution_contract_checks(self, small_run):
        _, config, solution = small_run
        with pytest.raises(ContractError):
            TrainedSolution(solution.grid, config, solution.y_nets[:-1],
                            solution.z_nets, solution.training_losses,
                            1, 1, 1)
        bad_net = nets.init_net([3, 5, 1], 0)
        with pytest.raises(ContractError):
            TrainedSolution(solution.grid, config,
                            [bad_net] * 4, solution.z_nets,
                            solution.training_losses, 1, 1, 1)


class TestProblemUtilities:
    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SolverConfig(n_steps=0)
        with pytest.raises(ConfigError):
            SolverConfig(learning_rate=-1.0)
        with pytest.raises(ConfigError):
            SolverConfig(path_mode="resample")
        with pytest.raises(ConfigError):
            SolverConfig(z_grid="middle")
        with pytest.raises(ConfigError):
            SolverConfig(m_eval=0)
        with pytest.raises(ConfigError):
            SolverConfig(epochs=-1)
        # zero epochs is allowed: untrained-network sanity runs
        assert SolverConfig(epochs=0).epochs == 0
        assert SolverConfig(n_paths=100).eval_paths == 100
        assert SolverConfig(n_paths=100, m_eval=7).eval_paths == 7

    def test_problem_validation(self):
        with pytest.raises(ConfigError):
            BsvieProblem(state_dim=0, value_dim=1, noise_dim=1,
                         drift=None, diffusion=None, generator=None,
                         terminal=None, x0=np.zeros(1), horizon=1.0)
        with pytest.raises(ConfigError):
            BsvieProblem(state_dim=1, value_dim=1, noise_dim=1,
                         drift=None, diffusion=None, generator=None,
                         terminal=None, x0=np.zeros(2), horizon=1.0)
        with pytest.raises(ConfigError):
            BsvieProblem(state_dim=1, value_dim=1, noise_dim=1,
                         drift=None, diffusion=None, generator=None,
                         terminal=None, x0=np.zeros(1), horizon=1.0,
                         exact_forward=True)

    def test_validate_problem_shape_and_finite_checks(self):
        bad_shape = _constant_problem()
        bad_shape.terminal = lambda t, x_t, x_term: np.zeros(x_t.shape[0])
        with pytest.raises(ContractError):
            validate_problem(bad_shape)
        non_finite = _constant_problem()
        non_finite.generator = lambda t, s, x_t, x_s, y, z: np.full_like(
            y, np.inf)
        with pytest.raises(InputError):
            validate_problem(non_finite)

    def test_validate_problem_lipschitz_warning(self):
        steep = _constant_problem()
        steep.generator = lambda t, s, x_t, x_s, y, z: 1000.0 * y
        with pytest.warns(RuntimeWarning):
            estimates = validate_problem(steep)
        assert estimates["lipschitz_y"] > 100.0

    def test_simulate_problem_paths_exact_route(self):
        problem = BsvieProblem(
            state_dim=1, value_dim=1, noise_dim=1,
            drift=lambda t, x: 0.1 * x,
            diffusion=lambda t, x: 0.2 * x[:, :, None],
            generator=lambda t, s, x_t, x_s, y, z: np.zeros_like(y),
            terminal=lambda t, x_t, x_term: x_term.copy(),
            x0=np.ones(1), horizon=1.0,
            exact_forward=True, gbm_drift=0.1, gbm_vol=0.2)
        grid = TimeGrid(1.0, 5)
        got = simulate_problem_paths(problem, grid, 32, seed=31)
        db = brownian_increments(grid, 32, 1, 31)
        expected = simulate_gbm_exact(0.1, 0.2, problem.x0, grid, db,
                                      seed=31)
        np.testing.assert_array_equal(got.states, expected.states)

    def test_simulate_problem_paths_euler_route(self):
        problem = _constant_problem()
        grid = TimeGrid(1.0, 5)
        got = simulate_problem_paths(problem, grid, 32, seed=37)
        db = brownian_increments(grid, 32, 1, 37)
        expected = simulate_euler(problem.drift, problem.diffusion,
                                  problem.x0, grid, db, seed=37)
        np.testing.assert_array_equal(got.states, expected.states)
