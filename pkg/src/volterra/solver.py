"""Backward-recursive deep solver for Type-I backward stochastic Volterra
integral equations (BSVIEs)

    Y(t) = g(t, X(t), X(T)) + ∫_t^T f(t,s,X(t),X(s),Y(s),Z(t,s)) ds
                            − ∫_t^T Z(t,s) dB(s).

On a uniform grid the solver trains, per time index n from N−1 down to 0, a
value network Y^n(t_n, x) and a two-time kernel network Z^n(t_n, t_m, x_n,
x_m) so that the prediction matches the discrete residual

    G_n = g(t_n, X_n, X_N) + Σ_{m=n..N−1} f(t_n,t_m,X_n,X_m,Ŷ_m,Ẑ(t_n,t_m))Δt
          − Σ_{m=n..N−1} Ẑ(t_n,t_m)·ΔB_m

in mean square over simulated paths.  Future values Ŷ_m, m>n come from the
already-trained (frozen) networks; the diagonal Ŷ_n inside the f-sum is the
current network's own output and carries gradients.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from . import backend, nets
from .errors import ConfigError, ContractError, InputError, TrainingError
from .paths import (PathBatch, TimeGrid, brownian_increments, simulate_euler,
                    simulate_gbm_exact)
from .rng import TAG_EVAL, TAG_TRAIN


@dataclass
class BsvieProblem:
    """A Type-I BSVIE: forward SDE coefficients plus generator and terminal.

    Batch conventions: `drift(t, x)` and `diffusion(t, x)` take a scalar time
    and states [M, n] and return [M, n] / [M, n, d]; `generator(t, s, x_t,
    x_s, y, z)` takes scalar times, states [M, n], values [M, m] and kernel
    values [M, m, d] and returns [M, m]; `terminal(t, x_t, x_T)` returns
    [M, m].  Optional analytic partials `generator_dy` -> [M, m, m] and
    `generator_dz` -> [M, m, m, d] avoid the finite-difference fallback in
    the training loop.
    """

    state_dim: int
    value_dim: int
    noise_dim: int
    drift: Callable
    diffusion: Callable
    generator: Callable
    terminal: Callable
    x0: np.ndarray
    horizon: float
    exact_forward: bool = False
    gbm_drift: Optional[float] = None
    gbm_vol: Optional[float] = None
    generator_dy: Optional[Callable] = None
    generator_dz: Optional[Callable] = None
    label: str = ""

    def __post_init__(self):
        if min(self.state_dim, self.value_dim, self.noise_dim) < 1:
            raise ConfigError("all dimensions must be >= 1")
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=np.float64))
        if self.x0.shape != (self.state_dim,):
            raise ConfigError(
                f"x0 shape {self.x0.shape}, expected ({self.state_dim},)")
        if self.exact_forward and (self.gbm_drift is None
                                   or self.gbm_vol is None):
            raise ConfigError(
                "exact_forward requires gbm_drift and gbm_vol")


@dataclass
class SolverConfig:
    """Training hyperparameters; defaults match the reference setup."""

    n_steps: int = 50
    n_paths: int = 8192
    epochs: int = 500
    learning_rate: float = 1e-3
    hidden_layers: int = 3
    hidden_width: int = 11
    seed: int = 0
    path_mode: str = "fresh"          # "fresh" (new paths per epoch) | "frozen"
    m_eval: Optional[int] = None      # evaluation paths; defaults to n_paths
    warm_start: bool = False          # initialize step n from step n+1's nets
    z_grid: str = "diagonal"          # "diagonal" (Z at (t_n,t_m), m=n..N−1)
                                      # | "right" (Z at (t_n,t_{m+1}))

    def __post_init__(self):
        for name in ("n_steps", "n_paths", "hidden_layers", "hidden_width"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
            setattr(self, name, int(getattr(self, name)))
        # epochs == 0 is a valid sanity path: networks stay at their
        # initialization and the evaluation pipeline still runs.
        if int(self.epochs) < 0:
            raise ConfigError("epochs must be >= 0")
        self.epochs = int(self.epochs)
        if not self.learning_rate >= 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.path_mode not in ("fresh", "frozen"):
            raise ConfigError(
                f"path_mode must be 'fresh' or 'frozen', got {self.path_mode!r}")
        if self.z_grid not in ("diagonal", "right"):
            raise ConfigError(
                f"z_grid must be 'diagonal' or 'right', got {self.z_grid!r}")
        if self.m_eval is not None and int(self.m_eval) < 1:
            raise ConfigError("m_eval must be >= 1")

    @property
    def eval_paths(self) -> int:
        return self.n_paths if self.m_eval is None else int(self.m_eval)


class TrainedSolution:
    """Per-step trained networks plus the recorded loss curves."""

    __slots__ = ("grid", "config", "problem_label", "value_dim", "noise_dim",
                 "state_dim", "y_nets", "z_nets", "training_losses")

    def __init__(self, grid, config, y_nets, z_nets, training_losses,
                 state_dim, value_dim, noise_dim, problem_label=""):
        n = grid.n_steps
        if len(y_nets) != n or len(z_nets) != n:
            raise ContractError(
                f"need {n} networks per family, got {len(y_nets)}/{len(z_nets)}")
        for net in y_nets:
            if net.input_dim != 1 + state_dim or net.output_dim != value_dim:
                raise ContractError("value-net dims inconsistent with problem")
        for net in z_nets:
            if (net.input_dim != 2 + 2 * state_dim
                    or net.output_dim != value_dim * noise_dim):
                raise ContractError("kernel-net dims inconsistent with problem")
        self.grid = grid
        self.config = config
        self.problem_label = problem_label
        self.state_dim = state_dim
        self.value_dim = value_dim
        self.noise_dim = noise_dim
        self.y_nets = y_nets
        self.z_nets = z_nets
        self.training_losses = training_losses


def validate_problem(problem: BsvieProblem, n_samples: int = 64,
                     seed: int = 0, lipschitz_bound: float = 100.0) -> dict:
    """Spot-check that f and g are finite, and probe Lipschitz ratios in (y,z).

    Returns {"lipschitz_y": est, "lipschitz_z": est}; exceeding
    `lipschitz_bound` only warns (the bound is a sanity net, not a theorem).
    """
    rng = np.random.default_rng(seed)
    nd, m, d = problem.state_dim, problem.value_dim, problem.noise_dim
    scale = 1.0 + np.abs(problem.x0)
    x_t = problem.x0 + scale * rng.normal(size=(n_samples, nd))
    x_s = problem.x0 + scale * rng.normal(size=(n_samples, nd))
    y = rng.normal(size=(n_samples, m))
    z = rng.normal(size=(n_samples, m, d))
    t = float(rng.uniform(0, problem.horizon))
    s = float(rng.uniform(t, problem.horizon))

    g_vals = np.asarray(problem.terminal(t, x_t, x_s), dtype=np.float64)
    f_vals = np.asarray(problem.generator(t, s, x_t, x_s, y, z),
                        dtype=np.float64)
    if g_vals.shape != (n_samples, m):
        raise ContractError(f"terminal returned shape {g_vals.shape}, "
                            f"expected {(n_samples, m)}")
    if f_vals.shape != (n_samples, m):
        raise ContractError(f"generator returned shape {f_vals.shape}, "
                            f"expected {(n_samples, m)}")
    if not np.isfinite(g_vals).all():
        raise InputError("terminal produced non-finite values on finite input")
    if not np.isfinite(f_vals).all():
        raise InputError("generator produced non-finite values on finite input")

    h = 1e-4
    dy = rng.normal(size=(n_samples, m))
    dy /= np.linalg.norm(dy, axis=1, keepdims=True)
    dz = rng.normal(size=(n_samples, m, d))
    dz /= np.linalg.norm(dz.reshape(n_samples, -1), axis=1).reshape(
        n_samples, *([1] * 2))
    fy = np.asarray(problem.generator(t, s, x_t, x_s, y + h * dy, z))
    fz = np.asarray(problem.generator(t, s, x_t, x_s, y, z + h * dz))
    lip_y = float(np.max(np.linalg.norm(fy - f_vals, axis=1)) / h)
    lip_z = float(np.max(np.linalg.norm(fz - f_vals, axis=1)) / h)
    if max(lip_y, lip_z) > lipschitz_bound:
        warnings.warn(
            f"generator Lipschitz probe {max(lip_y, lip_z):.3g} exceeds "
            f"bound {lipschitz_bound:.3g}", RuntimeWarning)
    return {"lipschitz_y": lip_y, "lipschitz_z": lip_z}


def simulate_problem_paths(problem: BsvieProblem, grid: TimeGrid,
                           m_paths: int, seed) -> PathBatch:
    """Simulate the problem's forward process: exact GBM or Euler–Maruyama."""
    db = brownian_increments(grid, m_paths, problem.noise_dim, seed)
    if problem.exact_forward:
        return simulate_gbm_exact(problem.gbm_drift, problem.gbm_vol,
                                  problem.x0, grid, db, seed=seed)
    return simulate_euler(problem.drift, problem.diffusion, problem.x0,
                          grid, db, seed=seed)


def residual(problem: BsvieProblem, paths: PathBatch, n: int,
             y_future: np.ndarray, z_row: np.ndarray) -> np.ndarray:
    """Discrete residual G_n per path, shape [M, m].

    `y_future[i]` holds Ŷ_{n+i} values [M, m] and `z_row[i]` holds
    Ẑ(t_n, t_{n+i}) values [M, m, d], both for i = 0..N−1−n.
    """
    grid = paths.grid
    big_n = grid.n_steps
    if not 0 <= n < big_n:
        raise ContractError(f"step index {n} outside 0..{big_n - 1}")
    r = big_n - n
    m_paths = paths.n_paths
    mv, d = problem.value_dim, problem.noise_dim
    y_future = np.asarray(y_future, dtype=np.float64)
    z_row = np.asarray(z_row, dtype=np.float64)
    if y_future.shape != (r, m_paths, mv):
        raise ContractError(
            f"y_future shape {y_future.shape}, expected {(r, m_paths, mv)}")
    if z_row.shape != (r, m_paths, mv, d):
        raise ContractError(
            f"z_row shape {z_row.shape}, expected {(r, m_paths, mv, d)}")

    t_n = grid.nodes[n]
    x_n = paths.states[:, n, :]
    x_big_n = paths.states[:, big_n, :]
    g_term = np.asarray(problem.terminal(t_n, x_n, x_big_n), dtype=np.float64)
    f_sum = np.zeros((m_paths, mv))
    zdb_sum = np.zeros((m_paths, mv))
    for i in range(r):
        m_idx = n + i
        f_sum += np.asarray(
            problem.generator(t_n, grid.nodes[m_idx], x_n,
                              paths.states[:, m_idx, :],
                              y_future[i], z_row[i]),
            dtype=np.float64).reshape(m_paths, mv)
        zdb_sum += np.einsum("jad,jd->ja", z_row[i],
                             paths.increments[:, m_idx, :])
    return g_term.reshape(m_paths, mv) + grid.dt * f_sum - zdb_sum


def step_loss(y_pred: np.ndarray, resid: np.ndarray) -> float:
    """Mean over paths of the squared Euclidean prediction–residual gap."""
    y_pred = np.asarray(y_pred, dtype=np.float64)
    resid = np.asarray(resid, dtype=np.float64)
    if y_pred.shape != resid.shape:
        raise ContractError(
            f"shape mismatch: {y_pred.shape} vs {resid.shape}")
    if not (np.isfinite(y_pred).all() and np.isfinite(resid).all()):
        raise InputError("non-finite values in loss inputs")
    diff = y_pred - resid
    return float(np.sum(diff * diff) / y_pred.shape[0])


def _generator_partials(problem, t, s, x_n, x_s, y, z, need_dy, need_dz):
    """(df/dy [M,m,m], df/dz [M,m,m,d]); analytic when provided, else central
    finite differences."""
    m_paths = x_n.shape[0]
    mv, d = problem.value_dim, problem.noise_dim
    dfdy = dfdz = None
    if need_dy:
        if problem.generator_dy is not None:
            dfdy = np.asarray(problem.generator_dy(t, s, x_n, x_s, y, z),
                              dtype=np.float64)
            dfdy = np.broadcast_to(dfdy, (m_paths, mv, mv))
        else:
            dfdy = np.empty((m_paths, mv, mv))
            h = 1e-6 * max(1.0, float(np.max(np.abs(y))))
            for b in range(mv):
                yp = y.copy(); yp[:, b] += h
                ym = y.copy(); ym[:, b] -= h
                fp = np.asarray(problem.generator(t, s, x_n, x_s, yp, z))
                fm = np.asarray(problem.generator(t, s, x_n, x_s, ym, z))
                dfdy[:, :, b] = (fp - fm) / (2 * h)
    if need_dz:
        if problem.generator_dz is not None:
            dfdz = np.asarray(problem.generator_dz(t, s, x_n, x_s, y, z),
                              dtype=np.float64)
            dfdz = np.broadcast_to(dfdz, (m_paths, mv, mv, d))
        else:
            dfdz = np.empty((m_paths, mv, mv, d))
            h = 1e-6 * max(1.0, float(np.max(np.abs(z))))
            for b in range(mv):
                for c in range(d):
                    zp = z.copy(); zp[:, b, c] += h
                    zm = z.copy(); zm[:, b, c] -= h
                    fp = np.asarray(problem.generator(t, s, x_n, x_s, y, zp))
                    fm = np.asarray(problem.generator(t, s, x_n, x_s, y, zm))
                    dfdz[:, :, b, c] = (fp - fm) / (2 * h)
    return dfdy, dfdz


def _build_y_input_t(t_val, x, out=None):
    """Feature-major value-net input [1+n, M] for states x [M, n]."""
    m_paths, nd = x.shape
    if out is None:
        out = np.empty((1 + nd, m_paths))
    out[0] = t_val
    out[1:] = x.T
    return out


def _build_z_input_t(grid, n, states, z_offset):
    """Feature-major kernel-net input [2+2n, M·R] for step n.

    Block i (rows i·M..(i+1)·M) holds (t_n, t_{n+i+off}, X_n, X_{n+i+off}).
    """
    big_n = grid.n_steps
    r = big_n - n
    m_paths, nd = states.shape[0], states.shape[2]
    v = np.empty((2 + 2 * nd, r * m_paths))
    v[0] = grid.nodes[n]
    x_n_t = states[:, n, :].T
    for i in range(r):
        blk = slice(i * m_paths, (i + 1) * m_paths)
        m_idx = n + i + z_offset
        v[1, blk] = grid.nodes[m_idx]
        v[2:2 + nd, blk] = x_n_t
        v[2 + nd:, blk] = states[:, m_idx, :].T
    return v


class _StepContext:
    """Per-step data for one training epoch: inputs, futures, buffers.

    `loss_and_grads` runs one full forward/residual/backward pass and is the
    single code path used by the training loop (and by gradient tests).
    """

    __slots__ = ("problem", "grid", "n", "paths", "y_fut", "u_t", "v_t",
                 "g_term", "ws_y", "ws_z", "z_seed", "z_offset")

    def __init__(self, problem, grid, n, paths, y_fut, ws_y, ws_z, z_offset):
        m_paths = paths.n_paths
        mv = problem.value_dim
        self.problem = problem
        self.grid = grid
        self.n = n
        self.paths = paths
        self.y_fut = y_fut
        self.z_offset = z_offset
        self.u_t = _build_y_input_t(grid.nodes[n], paths.states[:, n, :])
        self.v_t = _build_z_input_t(grid, n, paths.states, z_offset)
        self.g_term = np.asarray(
            problem.terminal(grid.nodes[n], paths.states[:, n, :],
                             paths.states[:, grid.n_steps, :]),
            dtype=np.float64).reshape(m_paths, mv)
        self.ws_y = ws_y
        self.ws_z = ws_z
        r = grid.n_steps - n
        self.z_seed = np.empty((r, m_paths, mv * problem.noise_dim))

    def loss_and_grads(self, y_net, z_net):
        """One epoch's loss and parameter gradients for both networks.

        Returns (loss, (y_dw, y_db), (z_dw, z_db)); gradient arrays live in
        the workspaces and are consumed before the next call.
        """
        problem, grid, n, paths = self.problem, self.grid, self.n, self.paths
        big_n = grid.n_steps
        r = big_n - n
        m_paths = paths.n_paths
        mv, d = problem.value_dim, problem.noise_dim
        md = mv * d
        dt = grid.dt
        t_n = grid.nodes[n]
        x_n = paths.states[:, n, :]

        # kernel net first; the value net's cached activations must be the
        # ones its backward pass consumes
        z_out = backend.forward_cached_ws(z_net.weights, z_net.biases,
                                          self.v_t, self.ws_z)
        y_out = backend.forward_cached_ws(y_net.weights, y_net.biases,
                                          self.u_t, self.ws_y)
        y_diag = y_out.T                    # [M, mv] view
        z_vals = z_out.T.reshape(r, m_paths, mv, d)

        f_sum = np.zeros((m_paths, mv))
        zdb = np.zeros((m_paths, mv))
        for i in range(r):
            m_idx = n + i
            y_i = y_diag if i == 0 else self.y_fut[i - 1]
            f_sum += np.asarray(
                problem.generator(t_n, grid.nodes[m_idx], x_n,
                                  paths.states[:, m_idx, :], y_i, z_vals[i]),
                dtype=np.float64).reshape(m_paths, mv)
            zdb += np.einsum("jad,jd->ja", z_vals[i],
                             paths.increments[:, m_idx, :])
        resid_vals = self.g_term + dt * f_sum - zdb
        delta = y_diag - resid_vals
        loss = float(np.sum(delta * delta) / m_paths)
        if not np.isfinite(loss):
            return loss, None, None

        two_over_m = 2.0 / m_paths
        dfdy0, _ = _generator_partials(problem, t_n, t_n, x_n, x_n,
                                       y_diag, z_vals[0],
                                       need_dy=True, need_dz=False)
        y_seed = delta - dt * np.einsum("jab,ja->jb", dfdy0, delta)
        y_seed *= two_over_m
        for i in range(r):
            m_idx = n + i
            y_i = y_diag if i == 0 else self.y_fut[i - 1]
            _, dfdz = _generator_partials(problem, t_n, grid.nodes[m_idx],
                                          x_n, paths.states[:, m_idx, :],
                                          y_i, z_vals[i],
                                          need_dy=False, need_dz=True)
            zs = (delta[:, :, None] * paths.increments[:, m_idx, None, :]
                  - dt * np.einsum("jabd,ja->jbd", dfdz, delta))
            self.z_seed[i] = zs.reshape(m_paths, md)
        self.z_seed *= two_over_m

        yg_t = np.ascontiguousarray(y_seed.T)
        zg_t = np.ascontiguousarray(
            self.z_seed.reshape(r * m_paths, md).T)
        y_grads = backend.backward_ws(y_net.weights, y_net.biases,
                                      self.u_t, self.ws_y, yg_t)
        z_grads = backend.backward_ws(z_net.weights, z_net.biases,
                                      self.v_t, self.ws_z, zg_t)
        return loss, y_grads, z_grads


def _train_engine(problem: BsvieProblem, config: SolverConfig,
                  barrier=None):
    """Backward sweep shared by the plain and reflected solvers.

    With `barrier` set (callable t -> floor value), future values consumed by
    earlier steps are projected to max(value, barrier(t_m)) and per-path
    projection records are returned; the training loss itself always targets
    the raw prediction.  Returns (y_nets, z_nets, losses, grid, records)
    where records is None without a barrier and (raw, projected, kappa)
    arrays of shape [M, N, m] with one.
    """
    grid = TimeGrid(problem.horizon, config.n_steps)
    big_n = config.n_steps
    m_paths = config.n_paths
    nd, mv, d = problem.state_dim, problem.value_dim, problem.noise_dim
    md = mv * d
    z_offset = 1 if config.z_grid == "right" else 0
    y_dims = [1 + nd] + [config.hidden_width] * config.hidden_layers + [mv]
    z_dims = [2 + 2 * nd] + [config.hidden_width] * config.hidden_layers + [md]
    barrier_vals = (None if barrier is None
                    else np.array([float(barrier(grid.nodes[k]))
                                   for k in range(big_n)]))

    frozen = config.path_mode == "frozen"
    if frozen:
        paths = simulate_problem_paths(problem, grid, m_paths,
                                       (config.seed, TAG_TRAIN))
        y_future_store = [None] * big_n   # projected values on frozen batch

    y_nets = [None] * big_n
    z_nets = [None] * big_n
    losses = [None] * big_n
    if barrier is not None:
        raw_rec = np.empty((m_paths, big_n, mv))
        proj_rec = np.empty((m_paths, big_n, mv))

    ws_y = backend.Workspace(y_dims, m_paths)

    for n in range(big_n - 1, -1, -1):
        r = big_n - n
        rows_z = r * m_paths
        t_n = grid.nodes[n]
        if config.warm_start and n < big_n - 1:
            y_net = y_nets[n + 1].copy()
            z_net = z_nets[n + 1].copy()
        else:
            y_net = nets.init_net(y_dims, (config.seed, n, 0))
            z_net = nets.init_net(z_dims, (config.seed, n, 1))
        y_state = nets.AdamState(y_net, learning_rate=config.learning_rate)
        z_state = nets.AdamState(z_net, learning_rate=config.learning_rate)
        ws_z = backend.Workspace(z_dims, rows_z)
        step_losses = []

        if frozen:
            y_fut = [y_future_store[n + i] for i in range(1, r)]
            ctx = _StepContext(problem, grid, n, paths, y_fut, ws_y, ws_z,
                               z_offset)

        try:
            for epoch in range(config.epochs):
                if not frozen:
                    paths = simulate_problem_paths(
                        problem, grid, m_paths,
                        (config.seed, TAG_TRAIN, n, epoch))
                    y_fut = []
                    for i in range(1, r):
                        m_idx = n + i
                        vals = nets.forward(
                            y_nets[m_idx],
                            _build_y_input_t(grid.nodes[m_idx],
                                             paths.states[:, m_idx, :]).T,
                            check=False)
                        if barrier_vals is not None:
                            np.maximum(vals, barrier_vals[m_idx], out=vals)
                        y_fut.append(vals)
                    ctx = _StepContext(problem, grid, n, paths, y_fut,
                                       ws_y, ws_z, z_offset)

                loss, y_grads, z_grads = ctx.loss_and_grads(y_net, z_net)
                step_losses.append(loss)
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"loss diverged at step {n}, epoch {epoch}",
                        step=n,
                        last_state={"y_net": y_net.copy(),
                                    "z_net": z_net.copy(),
                                    "epoch": epoch,
                                    "losses": step_losses[:-1]})
                nets.adam_step(y_net, y_state, nets.GradBundle(*y_grads))
                nets.adam_step(z_net, z_state, nets.GradBundle(*z_grads))
        except TrainingError as err:
            if err.step is None:
                err.step = n
            if err.last_state is None:
                err.last_state = {"y_net": y_net.copy(),
                                  "z_net": z_net.copy(),
                                  "losses": step_losses}
            raise

        y_nets[n] = y_net
        z_nets[n] = z_net
        losses[n] = step_losses

        if barrier_vals is not None or frozen:
            if not frozen and config.epochs == 0:
                # Zero-epoch sanity runs never entered the loop above, so no
                # fresh batch exists yet; draw the one epoch 0 would have used.
                paths = simulate_problem_paths(problem, grid, m_paths,
                                               (config.seed, TAG_TRAIN, n, 0))
            raw_n = nets.forward(
                y_net, _build_y_input_t(t_n, paths.states[:, n, :]).T,
                check=False)
        if barrier_vals is not None:
            proj_n = np.maximum(raw_n, barrier_vals[n])
            raw_rec[:, n, :] = raw_n
            proj_rec[:, n, :] = proj_n
        if frozen:
            y_future_store[n] = (raw_n if barrier_vals is None else proj_n)

    records = None
    if barrier is not None:
        records = (raw_rec, proj_rec, proj_rec - raw_rec, barrier_vals)
    return y_nets, z_nets, losses, grid, records


def train(problem: BsvieProblem, config: SolverConfig) -> TrainedSolution:
    """Run the backward training sweep and return the trained networks.

    Raises TrainingError (with the step index and last finite parameters
    attached) if the loss diverges.
    """
    y_nets, z_nets, losses, grid, _ = _train_engine(problem, config)
    return TrainedSolution(grid, config, y_nets, z_nets, losses,
                           problem.state_dim, problem.value_dim,
                           problem.noise_dim, problem_label=problem.label)


def evaluate(solution: TrainedSolution, paths: PathBatch):
    """Network evaluations on a path batch.

    Returns (y_hat [M, N, m], z_hat [M, P, m, d]) with P = N(N+1)/2 pairs
    (n, k), 0 <= n <= k <= N−1, ordered as `triangular_pairs`.
    """
    grid = solution.grid
    if paths.grid != grid:
        raise ContractError(
            f"paths grid {paths.grid} does not match solution grid {grid}")
    if paths.state_dim != solution.state_dim:
        raise ContractError("path state dim does not match solution")
    big_n = grid.n_steps
    m_paths = paths.n_paths
    mv, d = solution.value_dim, solution.noise_dim
    z_offset = 1 if solution.config.z_grid == "right" else 0

    y_hat = np.empty((m_paths, big_n, mv))
    for n in range(big_n):
        y_hat[:, n, :] = nets.forward(
            solution.y_nets[n],
            _build_y_input_t(grid.nodes[n], paths.states[:, n, :]).T,
            check=False)

    n_pairs = big_n * (big_n + 1) // 2
    z_hat = np.empty((m_paths, n_pairs, mv, d))
    pos = 0
    for n in range(big_n):
        r = big_n - n
        v_t = _build_z_input_t(grid, n, paths.states, z_offset)
        out_t = backend.forward_t(solution.z_nets[n].weights,
                                  solution.z_nets[n].biases, v_t)
        block = out_t.T.reshape(r, m_paths, mv, d)
        z_hat[:, pos:pos + r] = block.transpose(1, 0, 2, 3)
        pos += r
    return y_hat, z_hat


def _net_to_dict(net: nets.MlpNet) -> dict:
    return {"layer_dims": list(net.layer_dims),
            "weights": [w.ravel().tolist() for w in net.weights],
            "biases": [b.tolist() for b in net.biases]}


def _net_from_dict(d: dict) -> nets.MlpNet:
    dims = [int(x) for x in d["layer_dims"]]
    weights = [np.array(w, dtype=np.float64).reshape(dims[i + 1], dims[i])
               for i, w in enumerate(d["weights"])]
    biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
    return nets.MlpNet(dims, weights, biases)


def solution_to_dict(solution: TrainedSolution) -> dict:
    """JSON-ready dict; floats round-trip bit-exactly through json."""
    return {
        "format": "bsvie-trained-solution-v1",
        "grid": {"horizon": solution.grid.horizon,
                 "n_steps": solution.grid.n_steps},
        "config": asdict(solution.config),
        "problem_label": solution.problem_label,
        "state_dim": solution.state_dim,
        "value_dim": solution.value_dim,
        "noise_dim": solution.noise_dim,
        "y_nets": [_net_to_dict(net) for net in solution.y_nets],
        "z_nets": [_net_to_dict(net) for net in solution.z_nets],
        "training_losses": [list(map(float, c))
                            for c in solution.training_losses],
    }


def solution_from_dict(d: dict) -> TrainedSolution:
    if d.get("format") != "bsvie-trained-solution-v1":
        raise ConfigError(f"unrecognized solution format {d.get('format')!r}")
    grid = TimeGrid(d["grid"]["horizon"], d["grid"]["n_steps"])
    config = SolverConfig(**d["config"])
    return TrainedSolution(
        grid, config,
        [_net_from_dict(x) for x in d["y_nets"]],
        [_net_from_dict(x) for x in d["z_nets"]],
        d["training_losses"],
        d["state_dim"], d["value_dim"], d["noise_dim"],
        problem_label=d.get("problem_label", ""))


def save_solution(solution: TrainedSolution, fileobj) -> None:
    json.dump(solution_to_dict(solution), fileobj)


def load_solution(fileobj) -> TrainedSolution:
    return solution_from_dict(json.load(fileobj))


def evaluation_batch(problem: BsvieProblem, config: SolverConfig,
                     grid: Optional[TimeGrid] = None) -> PathBatch:
    """Independent evaluation paths (separate stream from training)."""
    if grid is None:
        grid = TimeGrid(problem.horizon, config.n_steps)
    return simulate_problem_paths(problem, grid, config.eval_paths,
                                  (config.seed, TAG_EVAL))
