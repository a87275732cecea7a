"""Numerical solver for Type-I backward stochastic Volterra integral
equations (BSVIEs) and their reflected variant.

Submodules:
    nets        dense tanh networks, exact gradients, Adam
    paths       Brownian increments and forward SDE simulation
    solver      backward training scheme for BSVIEs
    reflected   barrier-projected variant of the solver
    oracle      least-squares Monte Carlo discrete scheme (independent check)
    benchmarks  closed-form reference solutions
    metrics     L2 error metrics and report emission
    cli         command-line front end
    backend     compiled/pure-python kernel selection

The most commonly used names are re-exported here; the submodules stay
importable for everything else.
"""

__version__ = "0.1.0"

from . import backend
from .benchmarks import (Example1Spec, Example2Spec, build_example1,
                         build_example2, reference_on_batch,
                         resolvent_kernel)
from .errors import (ConfigError, ContractError, DomainError, InputError,
                     ShapeError, SimulationError, TrainingError,
                     VolterraError)
from .metrics import ErrorReport, l2_errors
from .oracle import (DiscreteSolution, RegressionBasis,
                     conditional_expectation, oracle_convergence,
                     solve_discrete)
from .paths import (PathBatch, TimeGrid, brownian_increments,
                    simulate_euler, simulate_gbm_exact)
from .reflected import (ReflectedProblem, ReflectedSolution,
                        build_regret_example, evaluate_reflected,
                        load_reflected, save_reflected, train_reflected)
from .solver import (BsvieProblem, SolverConfig, TrainedSolution, evaluate,
                     evaluation_batch, load_solution, save_solution, train)

__all__ = [
    "__version__", "backend",
    # problems and configuration
    "BsvieProblem", "SolverConfig", "ReflectedProblem",
    "Example1Spec", "Example2Spec",
    "build_example1", "build_example2", "build_regret_example",
    # training and evaluation
    "train", "evaluate", "evaluation_batch", "TrainedSolution",
    "train_reflected", "evaluate_reflected", "ReflectedSolution",
    "save_solution", "load_solution", "save_reflected", "load_reflected",
    # references, oracle, metrics
    "reference_on_batch", "resolvent_kernel",
    "RegressionBasis", "DiscreteSolution", "conditional_expectation",
    "solve_discrete", "oracle_convergence",
    "ErrorReport", "l2_errors",
    # simulation primitives
    "TimeGrid", "PathBatch", "brownian_increments",
    "simulate_euler", "simulate_gbm_exact",
    # error taxonomy
    "VolterraError", "ConfigError", "ContractError", "DomainError",
    "InputError", "ShapeError", "SimulationError", "TrainingError",
]
