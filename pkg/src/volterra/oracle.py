"""Least-squares Monte Carlo solver for the discrete two-time backward scheme.

An independent, non-neural cross-check for the trained solver.  On a uniform
grid the scheme defines, for pairs (k, l) with k ≤ l (value time t_k, running
time t_l), backwards from the terminal layer Y_N^{k} = g(t_k, X_k, X_N):

    Z_l^{k} = (1/Δt) E[ Y_{l+1}^{k} ΔB_l^T | F_l ],
    Y_l^{k} = E[ Y_{l+1}^{k} | F_l ] + Δt f(t_k, t_l, X_k, X_l, Y_l^{l}, Z_l^{k}),

with every conditional expectation realized by polynomial least-squares
regression on the Markov state (joint in (X_l, X_k) off the diagonal).  The
diagonal equation is implicit in its own y-argument; it is resolved by one
fixed-point evaluation initialized at the regression value E[Y_{l+1}^l | F_l].
The Z projection regresses the martingale increment (Y_{l+1} minus its fitted
conditional mean) times ΔB/Δt — the same conditional expectation with the
O(1/Δt) residual-variance amplification removed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .errors import ConfigError, InputError, ShapeError
from .paths import PathBatch, TimeGrid, triangular_pairs

__all__ = [
    "RegressionBasis", "DiscreteSolution", "conditional_expectation",
    "solve_discrete", "diagonal_y", "cell_values", "oracle_convergence",
    "loglog_slope", "write_oracle_csv", "write_convergence_csv",
]

_VAR_EPS = 1e-12


@dataclass(frozen=True)
class RegressionBasis:
    """Polynomial regression basis: monomials of total degree <= `degree`
    over the stacked regressor components, intercept included.  With
    `interactions=False` cross-variable products are dropped (pure powers).
    """

    degree: int = 3
    interactions: bool = True

    def __post_init__(self):
        if self.degree < 0:
            raise ConfigError(f"degree must be >= 0, got {self.degree}")

    def design(self, *regressors) -> np.ndarray:
        """Design matrix [M, n_features]; first column is the intercept."""
        cols = []
        for reg in regressors:
            arr = np.asarray(reg, dtype=np.float64)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.ndim != 2:
                raise ShapeError(f"regressor must be 1-d or 2-d, got "
                                 f"{arr.ndim}-d")
            cols.append(arr)
        if not cols:
            raise InputError("at least one regressor required")
        x = np.concatenate(cols, axis=1)
        m_rows, n_vars = x.shape
        features = [np.ones(m_rows)]
        for deg in range(1, self.degree + 1):
            for combo in combinations_with_replacement(range(n_vars), deg):
                if not self.interactions and len(set(combo)) > 1:
                    continue
                col = x[:, combo[0]].copy()
                for idx in combo[1:]:
                    col *= x[:, idx]
                features.append(col)
        return np.column_stack(features)


def conditional_expectation(targets, regressors, basis: RegressionBasis):
    """Fitted values of an ordinary least-squares regression of `targets`
    on polynomial features of the regressors — the Monte Carlo estimate of
    E[targets | regressors].

    `targets` is [M] or [M, q]; `regressors` a single array or tuple of
    arrays with M rows.  Constant (zero-variance) feature columns beyond the
    intercept are dropped before solving; a rank-deficient system falls back
    to ridge regression (lambda = 1e-8 scaled to the Gram trace) with a
    warning.
    """
    targets = np.asarray(targets, dtype=np.float64)
    squeeze = targets.ndim == 1
    t2 = targets[:, None] if squeeze else targets
    if t2.ndim != 2:
        raise ShapeError(f"targets must be 1-d or 2-d, got {targets.ndim}-d")
    if not isinstance(regressors, (tuple, list)):
        regressors = (regressors,)
    design = basis.design(*regressors)
    m_rows, n_feat = design.shape
    if t2.shape[0] != m_rows:
        raise ShapeError(f"targets have {t2.shape[0]} rows, design has "
                         f"{m_rows}")
    if m_rows < n_feat:
        raise InputError(f"need at least {n_feat} samples for {n_feat} "
                         f"features, got {m_rows}")

    # drop constant columns (collinear with the intercept), standardize the
    # rest; both operations preserve the regression's column span, so the
    # fitted values are unchanged while conditioning improves
    mean = design.mean(axis=0)
    std = design.std(axis=0)
    keep = np.ones(n_feat, dtype=bool)
    keep[1:] = std[1:] > _VAR_EPS * (1.0 + np.abs(mean[1:]))
    work = design[:, keep].copy()
    work[:, 1:] -= mean[keep][1:]
    work[:, 1:] /= std[keep][1:]

    beta, _, rank, _ = np.linalg.lstsq(work, t2, rcond=None)
    if rank < work.shape[1]:
        gram = work.T @ work
        lam = 1e-8 * np.trace(gram) / work.shape[1]
        warnings.warn("rank-deficient regression design; falling back to "
                      "ridge", RuntimeWarning, stacklevel=2)
        beta = np.linalg.solve(gram + lam * np.eye(work.shape[1]),
                               work.T @ t2)
    fitted = work @ beta
    return fitted[:, 0] if squeeze else fitted


@dataclass
class DiscreteSolution:
    """Per-path regression values over the triangular pair grid.

    Pairs (k, l), 0 <= k <= l <= N-1, row-major in k — the same layout as
    `solver.evaluate` and `benchmarks.reference_on_batch`.
    """

    grid: TimeGrid
    basis: RegressionBasis
    y_values: np.ndarray        # [M, P, m]
    z_values: np.ndarray        # [M, P, m, d]
    pair_rows: np.ndarray       # [P] value-time index k
    pair_cols: np.ndarray       # [P] running-time index l >= k

    @property
    def n_pairs(self) -> int:
        return self.pair_rows.shape[0]

    def cell_index(self, k: int, l: int) -> int:
        n = self.grid.n_steps
        if not 0 <= k <= l < n:
            raise InputError(f"cell ({k},{l}) outside triangular grid of "
                             f"{n} steps")
        return k * n - k * (k - 1) // 2 + (l - k)


def cell_values(solution: DiscreteSolution, k: int, l: int):
    """(Y, Z) per-path values of one triangular cell."""
    pos = solution.cell_index(k, l)
    return solution.y_values[:, pos], solution.z_values[:, pos]


def diagonal_y(solution: DiscreteSolution) -> np.ndarray:
    """Y_k^{k} per path for every k — the discrete value process [M, N, m]."""
    mask = solution.pair_rows == solution.pair_cols
    return solution.y_values[:, mask]


def solve_discrete(problem, grid: TimeGrid, paths: PathBatch,
                   basis: RegressionBasis | None = None) -> DiscreteSolution:
    """Backward least-squares Monte Carlo sweep over the triangular grid."""
    if basis is None:
        basis = RegressionBasis()
    if paths.grid != grid:
        raise ShapeError("path batch grid does not match the requested grid")
    big_n = grid.n_steps
    m_paths = paths.n_paths
    m_val, d = problem.value_dim, problem.noise_dim
    dt = grid.dt
    states, incs = paths.states, paths.increments

    rows, cols = triangular_pairs(big_n)
    n_pairs = rows.shape[0]
    y_values = np.empty((m_paths, n_pairs, m_val))
    z_values = np.empty((m_paths, n_pairs, m_val, d))
    pos_of = {(int(k), int(l)): p for p, (k, l) in enumerate(zip(rows, cols))}

    x_term = states[:, big_n, :]
    # current Y_{l+1}^{k} per k; starts at the terminal layer g(t_k, X_k, X_N)
    y_next = [
        np.asarray(problem.terminal(grid.nodes[k], states[:, k, :], x_term),
                   dtype=np.float64).reshape(m_paths, m_val)
        for k in range(big_n)
    ]

    for l in range(big_n - 1, -1, -1):
        t_l = grid.nodes[l]
        x_l = states[:, l, :]
        db = incs[:, l, :]

        def project(targets, regs):
            e_y = conditional_expectation(targets, regs, basis)
            resid = targets - e_y
            z_tgt = (resid[:, :, None] * db[:, None, :] / dt).reshape(
                m_paths, m_val * d)
            z = conditional_expectation(z_tgt, regs, basis)
            return e_y, z.reshape(m_paths, m_val, d)

        # diagonal cell first: its value feeds f's y-argument at this stage
        e_y, z_diag = project(y_next[l], x_l)
        f_diag = np.asarray(
            problem.generator(t_l, t_l, x_l, x_l, e_y, z_diag),
            dtype=np.float64).reshape(m_paths, m_val)
        y_diag = e_y + dt * f_diag
        pos = pos_of[(l, l)]
        y_values[:, pos] = y_diag
        z_values[:, pos] = z_diag
        y_next[l] = y_diag

        for k in range(l):
            e_y, z = project(y_next[k], (x_l, states[:, k, :]))
            f_val = np.asarray(
                problem.generator(grid.nodes[k], t_l, states[:, k, :], x_l,
                                  y_diag, z),
                dtype=np.float64).reshape(m_paths, m_val)
            y_cell = e_y + dt * f_val
            pos = pos_of[(k, l)]
            y_values[:, pos] = y_cell
            z_values[:, pos] = z
            y_next[k] = y_cell

    return DiscreteSolution(grid=grid, basis=basis, y_values=y_values,
                            z_values=z_values, pair_rows=rows, pair_cols=cols)


# --------------------------------------------------------------------------
# convergence study against the closed-form benchmark
# --------------------------------------------------------------------------

def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.log(np.asarray(x, dtype=np.float64))
    y = np.log(np.asarray(y, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


def oracle_convergence(n_values, m_paths: int, basis: RegressionBasis,
                       seed, refine: int = 4, horizon: float = 1.0,
                       problem=None, y_reference=None, z_reference=None):
    """Cell-integrated squared gaps of the discrete scheme against a
    closed-form reference, per grid resolution.

    By default the study runs the anticipatory linear benchmark against its
    analytic solution.  A custom `problem` may be injected together with
    `y_reference(t, b_values) -> array` and `z_reference(t, s) -> float`;
    the problem must drive a one-dimensional Brownian state (zero drift,
    unit diffusion) because the quadrature reuses the simulated Brownian
    values as the state path.

    The cell integrals are evaluated by a midpoint rule on a `refine`-times
    finer quadrature grid (the Brownian state is simulated at 2·refine
    resolution so the quadrature midpoints are true path values; the scheme
    itself runs on the subsampled coarse paths, which carry no forward
    bias).  Midpoint sampling captures the within-cell E|Y(t) − Y(t_k)|²
    term — linear in t − t_k, the source of the O(Δt) rate — exactly:

        err_y = Σ_k Σ_{midpoints t in cell k} (Δt/r) · E|Y(t) − Y_k^{k}|²,
        err_z = Σ_{k≤l} Σ_{midpoints (t,s) in cell, t≤s} w · E|Z(t,s) − Z_l^{k}|²,

    with w = (Δt/r)² off the fine diagonal and half that on it, so the
    triangular part of each diagonal cell carries its exact measure.
    Returns a list of dicts with keys N, dt, err_y, err_z.
    """
    from .benchmarks import analytic_y_ex1, analytic_z_ex1, build_example1
    from .rng import TAG_ORACLE, substream

    if problem is None:
        problem = build_example1(horizon=horizon)
    if y_reference is None:
        y_reference = lambda t, b: analytic_y_ex1(t, b, horizon)
    if z_reference is None:
        z_reference = lambda t, s: analytic_z_ex1(t, s, horizon)
    if problem.state_dim != 1 or problem.noise_dim != 1:
        raise ConfigError("the convergence study drives a one-dimensional "
                          "Brownian state")
    if refine < 1:
        raise ConfigError(f"refine must be >= 1, got {refine}")
    results = []
    for big_n in n_values:
        stride = 2 * refine
        sim_n = big_n * stride
        grid_s = TimeGrid(horizon, sim_n)
        grid_c = TimeGrid(horizon, big_n)
        gen = substream(seed, TAG_ORACLE, big_n)
        incs_s = gen.normal(0.0, math.sqrt(grid_s.dt),
                            size=(m_paths, sim_n, 1))
        b_sim = np.concatenate(
            [np.zeros((m_paths, 1)), np.cumsum(incs_s[:, :, 0], axis=1)],
            axis=1)
        states_c = b_sim[:, ::stride, None]
        incs_c = incs_s.reshape(m_paths, big_n, stride, 1).sum(axis=2)
        batch_c = PathBatch(grid_c, states_c, incs_c, seed=0)

        sol = solve_discrete(problem, grid_c, batch_c, basis)
        y_diag = diagonal_y(sol)[:, :, 0]

        def mid_index(cell: int, q: int) -> int:
            # midpoint of quadrature subcell q inside coarse cell `cell`
            return cell * stride + 2 * q + 1

        w1 = grid_c.dt / refine
        err_y = 0.0
        for k in range(big_n):
            for q in range(refine):
                idx = mid_index(k, q)
                y_true = y_reference(grid_s.nodes[idx], b_sim[:, idx])
                gap = y_true - y_diag[:, k]
                err_y += w1 * float(np.mean(gap * gap))

        # per-cell first/second moments make each fine (t,s) pair O(1)
        z_mean = sol.z_values[:, :, 0, 0].mean(axis=0)
        z_var = sol.z_values[:, :, 0, 0].var(axis=0)
        err_z = 0.0
        w2 = w1 * w1
        for pos, (k, l) in enumerate(zip(sol.pair_rows, sol.pair_cols)):
            for q in range(refine):
                tau_t = grid_s.nodes[mid_index(k, q)]
                q0 = q if l == k else 0
                for qq in range(q0, refine):
                    tau_s = grid_s.nodes[mid_index(l, qq)]
                    weight = w2 if (l > k or qq > q) else 0.5 * w2
                    gap = z_reference(tau_t, tau_s) - z_mean[pos]
                    err_z += weight * (gap * gap + z_var[pos])
        results.append({"N": int(big_n), "dt": grid_c.dt,
                        "err_y": err_y, "err_z": err_z})
    return results


def write_oracle_csv(fileobj, solution: DiscreteSolution) -> None:
    """Table `k,l,t_k,t_l,mean_Y,mean_Z` of path means over the triangular
    grid (first value/noise component)."""
    fileobj.write("k,l,t_k,t_l,mean_Y,mean_Z\n")
    nodes = solution.grid.nodes
    y_mean = solution.y_values[:, :, 0].mean(axis=0)
    z_mean = solution.z_values[:, :, 0, 0].mean(axis=0)
    for pos, (k, l) in enumerate(zip(solution.pair_rows, solution.pair_cols)):
        fileobj.write("%d,%d,%.17g,%.17g,%.17g,%.17g\n"
                      % (k, l, nodes[k], nodes[l], y_mean[pos], z_mean[pos]))


def write_convergence_csv(fileobj, results) -> None:
    """Table `N,dt,err_y,err_z` from `oracle_convergence` output."""
    fileobj.write("N,dt,err_y,err_z\n")
    for row in results:
        fileobj.write("%d,%.17g,%.17g,%.17g\n"
                      % (row["N"], row["dt"], row["err_y"], row["err_z"]))
