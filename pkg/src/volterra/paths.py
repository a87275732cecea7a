"""Forward SDE simulation on a uniform time grid.

Brownian increment generation, the Euler–Maruyama scheme, and exact
geometric-Brownian-motion simulation as a cross-check.  All simulation is a
pure function of (seed, grid, dims, coefficients) regardless of thread count.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError, SimulationError
from .rng import substream

BLOWUP_LIMIT = 1e12


class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_N = T with dt = T/N."""

    __slots__ = ("horizon", "n_steps", "dt", "nodes")

    def __init__(self, horizon: float, n_steps: int):
        horizon = float(horizon)
        n_steps = int(n_steps)
        if not horizon > 0:
            raise ConfigError(f"horizon must be positive, got {horizon}")
        if n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {n_steps}")
        self.horizon = horizon
        self.n_steps = n_steps
        self.dt = horizon / n_steps
        self.nodes = np.linspace(0.0, horizon, n_steps + 1)

    def __repr__(self):
        return f"TimeGrid(horizon={self.horizon}, n_steps={self.n_steps})"

    def __eq__(self, other):
        return (isinstance(other, TimeGrid)
                and self.horizon == other.horizon
                and self.n_steps == other.n_steps)


class PathBatch:
    """Simulated forward paths: states [M, N+1, n], increments [M, N, d]."""

    __slots__ = ("grid", "states", "increments", "seed")

    def __init__(self, grid: TimeGrid, states: np.ndarray,
                 increments: np.ndarray, seed=None):
        states = np.asarray(states, dtype=np.float64)
        increments = np.asarray(increments, dtype=np.float64)
        if states.ndim != 3 or increments.ndim != 3:
            raise ShapeError("states and increments must be 3-D arrays")
        m, n_nodes, _ = states.shape
        if n_nodes != grid.n_steps + 1:
            raise ShapeError(
                f"states has {n_nodes} nodes, grid wants {grid.n_steps + 1}")
        if increments.shape[0] != m or increments.shape[1] != grid.n_steps:
            raise ShapeError(
                f"increments shape {increments.shape} incompatible with "
                f"{m} paths on {grid.n_steps} steps")
        self.grid = grid
        self.states = states
        self.increments = increments
        self.seed = seed

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[2]

    @property
    def noise_dim(self) -> int:
        return self.increments.shape[2]


def brownian_increments(grid: TimeGrid, m_paths: int, d: int,
                        seed) -> np.ndarray:
    """i.i.d. N(0, dt) increments, shape [m_paths, N, d].

    Deterministic given (seed, grid, m_paths, d); `seed` may be an int or a
    tuple (entropy, *stream_tags) selecting an independent substream.
    """
    m_paths = int(m_paths)
    d = int(d)
    if m_paths < 1 or d < 1:
        raise ConfigError(f"need m_paths >= 1 and d >= 1, got {m_paths}, {d}")
    rng = substream(seed)
    return rng.normal(0.0, np.sqrt(grid.dt), size=(m_paths, grid.n_steps, d))


def simulate_euler(drift, diffusion, x0, grid: TimeGrid,
                   increments: np.ndarray, seed=None) -> PathBatch:
    """Euler–Maruyama: X_{k+1} = X_k + drift(t_k, X_k) dt + diffusion(t_k, X_k) dB_k.

    `drift(t, x)` maps a scalar time and states [M, n] to [M, n];
    `diffusion(t, x)` maps to [M, n, d].  Any |state| > 1e12 or non-finite
    state aborts with a SimulationError naming the path and step.
    """
    increments = np.asarray(increments, dtype=np.float64)
    if increments.ndim != 3 or increments.shape[1] != grid.n_steps:
        raise ShapeError(
            f"increments shape {increments.shape}; expected "
            f"[M, {grid.n_steps}, d]")
    m, _, d = increments.shape
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    n = x0.shape[0]
    states = np.empty((m, grid.n_steps + 1, n))
    states[:, 0, :] = x0
    x = np.broadcast_to(x0, (m, n)).copy()
    for k in range(grid.n_steps):
        t = grid.nodes[k]
        b = np.asarray(drift(t, x), dtype=np.float64).reshape(m, n)
        sig = np.asarray(diffusion(t, x), dtype=np.float64).reshape(m, n, d)
        x = x + b * grid.dt + np.einsum("mnd,md->mn", sig,
                                        increments[:, k, :])
        bad = ~np.isfinite(x) | (np.abs(x) > BLOWUP_LIMIT)
        if bad.any():
            j = int(np.argwhere(bad.any(axis=1))[0, 0])
            raise SimulationError(
                f"state blow-up (|x| > {BLOWUP_LIMIT:g} or non-finite)",
                path_index=j, step=k + 1)
        states[:, k + 1, :] = x
    return PathBatch(grid, states, increments, seed=seed)


def simulate_gbm_exact(mu: float, sigma: float, x0, grid: TimeGrid,
                       increments: np.ndarray, seed=None) -> PathBatch:
    """Exact GBM: X(t_k) = x0 · exp((mu − sigma²/2) t_k + sigma B(t_k)).

    Componentwise in the state; requires state dim == noise dim.
    """
    increments = np.asarray(increments, dtype=np.float64)
    if increments.ndim != 3 or increments.shape[1] != grid.n_steps:
        raise ShapeError(
            f"increments shape {increments.shape}; expected "
            f"[M, {grid.n_steps}, d]")
    m, _, d = increments.shape
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.shape[0] != d:
        raise ShapeError(
            f"exact GBM needs state dim == noise dim; got x0 dim "
            f"{x0.shape[0]}, noise dim {d}")
    if np.any(x0 <= 0):
        raise ConfigError("exact GBM requires positive initial state")
    brownian = np.zeros((m, grid.n_steps + 1, d))
    np.cumsum(increments, axis=1, out=brownian[:, 1:, :])
    t = grid.nodes[None, :, None]
    states = x0 * np.exp((mu - 0.5 * sigma ** 2) * t + sigma * brownian)
    return PathBatch(grid, states, increments, seed=seed)


def triangular_pairs(n_steps: int):
    """Index pairs (n, k) with 0 <= n <= k <= n_steps-1, row-major in n.

    Returns two int arrays of length n_steps(n_steps+1)/2; the two-time
    kernel surface is stored packed in this order.
    """
    n_idx, k_idx = np.triu_indices(n_steps)
    return n_idx, k_idx


def dump_paths_csv(batch: PathBatch, fileobj) -> None:
    """Write one row per (path, step): `path,step,time,x_0..x_{n-1}`."""
    n = batch.state_dim
    header = "path,step,time," + ",".join(f"x_{i}" for i in range(n))
    fileobj.write(header + "\n")
    nodes = batch.grid.nodes
    for j in range(batch.n_paths):
        for k in range(batch.grid.n_steps + 1):
            vals = ",".join("%.17g" % v for v in batch.states[j, k])
            fileobj.write(f"{j},{k},{'%.17g' % nodes[k]},{vals}\n")
