"""Reflected solver: the backward training sweep plus a barrier floor.

The reflected equation constrains the value process to stay above a barrier
L(t).  Training is identical to the plain solver — the loss always targets
the raw network prediction — but every value stored at a step, or consumed
by an earlier step's residual, is floored at the barrier:

    Y_hat_n = max(Y_tilde_n, L(t_n)),

the discrete counterpart of a Skorokhod reflection.  The per-path increment
kappa_n = Y_hat_n − Y_tilde_n ≥ 0 records where the constraint binds: it is
positive exactly on the paths whose raw prediction fell below the floor, and
kappa_n · (Y_hat_n − L(t_n)) = 0 holds identically (discrete flatness).  No
separate reflection process is trained; the projection increments are its
only representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, ContractError
from .paths import PathBatch
from .solver import (BsvieProblem, SolverConfig, TrainedSolution,
                     _train_engine, evaluate, solution_from_dict,
                     solution_to_dict)

__all__ = [
    "ReflectedProblem", "ReflectedSolution", "project", "train_reflected",
    "evaluate_reflected", "build_regret_example", "reflected_to_dict",
    "reflected_from_dict", "save_reflected", "load_reflected",
]

_PROJECTION_MODES = ("per-epoch", "per-step")


@dataclass
class ReflectedProblem:
    """A plain problem plus a finite floor L(t) on the value process.

    The barrier is a scalar function of time; a state-dependent barrier can
    be supplied through the same callable by closing over path data at
    evaluation time.
    """

    base: BsvieProblem
    barrier: Callable[[float], float]

    def __post_init__(self):
        if not callable(self.barrier):
            raise ConfigError("barrier must be a callable t -> level")
        horizon = self.base.horizon
        for t in np.linspace(0.0, horizon, 5):
            level = float(self.barrier(float(t)))
            if not np.isfinite(level):
                raise ConfigError(
                    f"barrier must be finite on [0, {horizon}]; "
                    f"got {level} at t={float(t)}")


def project(y_raw, barrier_value):
    """Componentwise floor projection max(y, L); idempotent."""
    return np.maximum(np.asarray(y_raw, dtype=np.float64), barrier_value)


@dataclass
class ReflectedSolution:
    """Trained networks plus the per-path projection record.

    `y_raw` holds the raw predictions Y_tilde on the final training batch,
    `y_projected` their floored values, and `kappa = y_projected − y_raw`
    the projection increments; all [M, N, m].  `barrier_values[n]` is
    L(t_n).
    """

    solution: TrainedSolution
    y_raw: np.ndarray
    y_projected: np.ndarray
    kappa: np.ndarray
    barrier_values: np.ndarray
    projection: str = "per-epoch"

    def __post_init__(self):
        n_steps = self.solution.grid.n_steps
        if not (self.y_raw.shape == self.y_projected.shape
                == self.kappa.shape):
            raise ContractError("projection record shapes disagree")
        if self.y_raw.ndim != 3 or self.y_raw.shape[1] != n_steps:
            raise ContractError(
                f"records must be [M, {n_steps}, m], got {self.y_raw.shape}")
        if self.barrier_values.shape != (n_steps,):
            raise ContractError(
                f"barrier values must be [{n_steps}], got "
                f"{self.barrier_values.shape}")
        floor = self.barrier_values[None, :, None]
        if not np.array_equal(self.y_projected,
                              np.maximum(self.y_raw, floor)):
            raise ContractError("projected values are not the floored raw "
                                "values")
        if np.any(self.kappa < 0):
            raise ContractError("projection increments must be nonnegative")
        if np.any((self.kappa > 0) & ~(self.y_raw < floor)):
            raise ContractError("positive increment on a non-binding path")

    def binding_fraction(self) -> np.ndarray:
        """Fraction of recorded paths with an active constraint, per step."""
        return (self.kappa > 0).any(axis=2).mean(axis=0)


def train_reflected(problem: ReflectedProblem, config: SolverConfig,
                    projection: str = "per-epoch") -> ReflectedSolution:
    """Backward sweep with barrier projection; returns networks and records.

    `projection` selects where the floor update is placed: after every
    gradient step ("per-epoch") or once when a time step finishes
    ("per-step").  The two placements produce identical results for this
    sweep — the loss targets the raw prediction and the values earlier steps
    consume are recomputed from the already-trained networks, so flooring
    them per epoch or once per step composes to the same function (the
    projection is memoryless and idempotent).  The flag records which
    reading was requested.
    """
    if projection not in _PROJECTION_MODES:
        raise ConfigError(f"projection must be one of {_PROJECTION_MODES}, "
                          f"got {projection!r}")
    y_nets, z_nets, losses, grid, records = _train_engine(
        problem.base, config, barrier=problem.barrier)
    raw, projected, kappa, barrier_values = records
    base = TrainedSolution(grid, config, y_nets, z_nets, losses,
                           problem.base.state_dim, problem.base.value_dim,
                           problem.base.noise_dim,
                           problem_label=problem.base.label)
    return ReflectedSolution(solution=base, y_raw=raw,
                             y_projected=projected, kappa=kappa,
                             barrier_values=barrier_values,
                             projection=projection)


def evaluate_reflected(solution: ReflectedSolution, paths: PathBatch):
    """Floored network evaluations on a path batch.

    Returns (y_projected [M, N, m], z_hat [M, P, m, d], kappa [M, N, m]).
    The barrier acts on the value process only; kernel values pass through
    unchanged.
    """
    y_raw, z_hat = evaluate(solution.solution, paths)
    floor = solution.barrier_values[None, :, None]
    y_projected = np.maximum(y_raw, floor)
    return y_projected, z_hat, y_projected - y_raw


def build_regret_example(floor: float = 0.1) -> ReflectedProblem:
    """Discounted call payoff on a geometric Brownian forward with a
    constant floor on the value process.

    Terminal g(t, x_t, x_T) = max(x_T − K, 0) / (1 + (T − t)) with K = 1,
    zero generator, Euler-simulated GBM (drift 0.07, volatility 0.2,
    X_0 = 1) on [0, 1], and L(t) = `floor` (default 0.1).
    """
    mu, sigma, strike, horizon = 0.07, 0.2, 1.0, 1.0

    def drift(t, x):
        return mu * x

    def diffusion(t, x):
        return sigma * x[:, :, None]

    def terminal(t, x_t, x_term):
        return np.maximum(x_term - strike, 0.0) / (1.0 + (horizon - t))

    def generator(t, s, x_t, x_s, y, z):
        return np.zeros_like(y)

    base = BsvieProblem(
        state_dim=1, value_dim=1, noise_dim=1,
        drift=drift, diffusion=diffusion,
        generator=generator, terminal=terminal,
        x0=np.ones(1), horizon=horizon,
        generator_dy=lambda t, s, x_t, x_s, y, z: np.zeros(
            (y.shape[0], 1, 1)),
        generator_dz=lambda t, s, x_t, x_s, y, z: np.zeros(
            (y.shape[0], 1, 1, 1)),
        label="regret-floor")
    return ReflectedProblem(base=base, barrier=lambda t: floor)


# --------------------------------------------------------------------------
# serialization: the plain format plus the projection record
# --------------------------------------------------------------------------

def reflected_to_dict(solution: ReflectedSolution) -> dict:
    """JSON-ready dict; floats round-trip bit-exactly through json."""
    return {
        "format": "bsvie-reflected-solution-v1",
        "solution": solution_to_dict(solution.solution),
        "projection": solution.projection,
        "barrier_values": solution.barrier_values.tolist(),
        "y_raw": solution.y_raw.tolist(),
        "y_projected": solution.y_projected.tolist(),
        "kappa": solution.kappa.tolist(),
    }


def reflected_from_dict(d: dict) -> ReflectedSolution:
    if d.get("format") != "bsvie-reflected-solution-v1":
        raise ConfigError(f"unrecognized solution format {d.get('format')!r}")
    return ReflectedSolution(
        solution=solution_from_dict(d["solution"]),
        y_raw=np.asarray(d["y_raw"], dtype=np.float64),
        y_projected=np.asarray(d["y_projected"], dtype=np.float64),
        kappa=np.asarray(d["kappa"], dtype=np.float64),
        barrier_values=np.asarray(d["barrier_values"], dtype=np.float64),
        projection=d.get("projection", "per-epoch"))


def save_reflected(solution: ReflectedSolution, fileobj) -> None:
    json.dump(reflected_to_dict(solution), fileobj)


def load_reflected(fileobj) -> ReflectedSolution:
    return reflected_from_dict(json.load(fileobj))
