"""Command-line front end: problem selection, training runs, discrete-scheme
convergence studies, and benchmark tables.

Three subcommands share one flat configuration:

  * ``volterra solve``  — train on a named problem, evaluate on independent
    paths, and write the trained solution plus metric CSVs.
  * ``volterra oracle`` — run the regression-based discrete scheme over a
    list of grid resolutions and write the convergence table.
  * ``volterra bench``  — train both closed-form benchmarks and print/write
    a {Y, Z} x {l2, rel_l2} error table.

Configuration precedence: command-line flags override values from the
``--config`` JSON file, which override built-in defaults.  The config file
is a single flat JSON object whose keys are the `RunConfig` field names
(``lr`` is accepted as an alias for ``learning_rate``).  When no seed is
given on the command line or in the file, the ``VOLTERRA_SEED`` environment
variable is used, then 0.

Every run writes a ``run_manifest.json`` listing a sha256 content hash for
each file emitted into the output directory.  All floating-point output is
printed with 17 significant digits so values round-trip exactly.

Exit codes: 0 success, 2 configuration error, 3 training divergence,
4 I/O error while writing artifacts.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .benchmarks import (Example2Spec, build_example1, build_example2,
                         reference_on_batch, write_analytic_y_csv,
                         write_analytic_z_csv)
from .errors import (ConfigError, InputError, SimulationError, TrainingError)
from .metrics import (l2_errors, write_loss_csv, write_metrics_csv,
                      write_mse_y_csv, write_mse_z_csv)
from .oracle import (RegressionBasis, oracle_convergence, solve_discrete,
                     write_convergence_csv, write_oracle_csv)
from .reflected import (ReflectedProblem, build_regret_example,
                        evaluate_reflected, save_reflected, train_reflected)
from .solver import (BsvieProblem, SolverConfig, evaluate, evaluation_batch,
                     save_solution, train)

__all__ = ["RunConfig", "build_run_config", "load_config_file",
           "cmd_solve", "cmd_oracle", "cmd_bench", "main",
           "EXIT_OK", "EXIT_CONFIG", "EXIT_DIVERGED", "EXIT_IO"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

SEED_ENV_VAR = "VOLTERRA_SEED"
DEFAULT_N_LIST = (5, 10, 20, 40)
_QUICK = {"n_steps": 10, "n_paths": 1024, "epochs": 100}
_MANIFEST_NAME = "run_manifest.json"
_MANIFEST_FORMAT = "bsvie-run-manifest-v1"

_INT_FIELDS = ("n_steps", "n_paths", "epochs", "hidden_layers",
               "hidden_width", "seed", "basis_degree", "refine")
_OPT_INT_FIELDS = ("m_eval", "threads")
_FLOAT_FIELDS = ("learning_rate", "horizon", "floor", "level")
_BOOL_FIELDS = ("warm_start", "quick", "emit_paths", "emit_oracle",
                "emit_metrics", "emit_surfaces")


def _fmt(x) -> str:
    return "%.17g" % float(x)


@dataclass
class RunConfig:
    """Flat, JSON-serializable description of one CLI run.

    Solver fields mirror `SolverConfig`; the remaining fields select the
    problem, the output directory, which artifacts to emit, and the
    parameters of the oracle convergence study.  `quick` shrinks the run
    to (N=10, M=1024, 100 epochs) without altering the stored fields.
    """

    problem: str = "example1"
    n_steps: int = 50
    n_paths: int = 8192
    epochs: int = 500
    learning_rate: float = 1e-3
    hidden_layers: int = 3
    hidden_width: int = 11
    seed: int = 0
    path_mode: str = "fresh"
    m_eval: int | None = None
    warm_start: bool = False
    z_grid: str = "diagonal"
    out: str = "volterra-out"
    threads: int | None = None
    quick: bool = False
    emit_paths: bool = False
    emit_oracle: bool = False
    emit_metrics: bool = True
    emit_surfaces: bool = True
    n_list: list = field(default_factory=lambda: list(DEFAULT_N_LIST))
    basis_degree: int = 3
    refine: int = 4
    horizon: float = 1.0
    floor: float = 0.1            # regret-floor barrier level
    level: float = 1.0            # constant-toy terminal value
    projection: str = "per-epoch"

    def __post_init__(self):
        for name in _INT_FIELDS:
            setattr(self, name, int(getattr(self, name)))
        for name in _OPT_INT_FIELDS:
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, int(value))
        for name in _FLOAT_FIELDS:
            setattr(self, name, float(getattr(self, name)))
        for name in _BOOL_FIELDS:
            setattr(self, name, bool(getattr(self, name)))
        if not isinstance(self.out, str) or not self.out:
            raise ConfigError("out must be a non-empty directory path")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            self.n_list = [int(n) for n in self.n_list]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"n_list must be a list of integers: {exc}")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ConfigError("n_list entries must be integers >= 1")
        if self.basis_degree < 0:
            raise ConfigError("basis_degree must be >= 0")
        if self.refine < 1:
            raise ConfigError("refine must be >= 1")

    def solver_config(self) -> SolverConfig:
        """SolverConfig for this run; `quick` overrides N/M/epochs."""
        n_steps, n_paths, epochs = self.n_steps, self.n_paths, self.epochs
        if self.quick:
            n_steps = _QUICK["n_steps"]
            n_paths = _QUICK["n_paths"]
            epochs = _QUICK["epochs"]
        return SolverConfig(
            n_steps=n_steps, n_paths=n_paths, epochs=epochs,
            learning_rate=self.learning_rate,
            hidden_layers=self.hidden_layers, hidden_width=self.hidden_width,
            seed=self.seed, path_mode=self.path_mode, m_eval=self.m_eval,
            warm_start=self.warm_start, z_grid=self.z_grid)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        values = _normalize_keys(values)
        return cls(**values)


def _normalize_keys(values: dict) -> dict:
    """Resolve the `lr` alias and reject unknown keys."""
    if not isinstance(values, dict):
        raise ConfigError("config must be a flat JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    out = {}
    for key, value in values.items():
        key = "learning_rate" if key == "lr" else key
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = value
    return out


def load_config_file(path: str) -> dict:
    """Flat JSON config document -> validated key/value dict."""
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}")
    try:
        values = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config file {path!r}: {exc}")
    return _normalize_keys(values)


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config-file values, flags, and the seed env var."""
    values: dict = {}
    if getattr(args, "config_file", None):
        values.update(load_config_file(args.config_file))
    for key in ("problem", "n_steps", "n_paths", "epochs", "learning_rate",
                "seed", "path_mode", "out", "threads"):
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    if getattr(args, "quick", False):
        values["quick"] = True
    if "seed" not in values:
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                values["seed"] = int(env_seed)
            except ValueError:
                raise ConfigError(
                    f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}")
    return RunConfig.from_dict(values)


# ---------------------------------------------------------------------------
# problem registry


def build_constant_problem(level: float = 1.0,
                           horizon: float = 1.0) -> BsvieProblem:
    """Brownian-state toy with constant terminal value and zero driver.

    Its solution is Y == level, Z == 0, which makes it a roundoff-level
    sanity case for both the trained solver and the discrete scheme.
    """

    def zero_dy(t, s, x_t, x_s, y, z):
        return np.zeros((x_t.shape[0], 1, 1))

    def zero_dz(t, s, x_t, x_s, y, z):
        return np.zeros((x_t.shape[0], 1, 1, 1))

    return BsvieProblem(
        state_dim=1, value_dim=1, noise_dim=1,
        drift=lambda t, x: np.zeros_like(x),
        diffusion=lambda t, x: np.ones(x.shape + (1,)),
        generator=lambda t, s, x_t, x_s, y, z: np.zeros_like(y),
        terminal=lambda t, x_t, x_big_t: np.full(
            (x_t.shape[0], 1), float(level)),
        generator_dy=zero_dy, generator_dz=zero_dz,
        x0=[0.0], horizon=horizon, label="constant")


SOLVE_PROBLEMS = ("example1", "example2", "regret-floor", "constant")
ORACLE_PROBLEMS = ("example1", "constant")


def _build_problem(config: RunConfig):
    """Problem instance for `cmd_solve`; reflected problems keep their type."""
    name = config.problem
    if name == "example1":
        return build_example1(horizon=config.horizon)
    if name == "example2":
        return build_example2(Example2Spec(horizon=config.horizon))
    if name == "constant":
        return build_constant_problem(config.level, config.horizon)
    if name == "regret-floor":
        return build_regret_example(floor=config.floor)
    raise ConfigError(
        f"unknown problem id {name!r}; known: {', '.join(SOLVE_PROBLEMS)}")


def _reference_for(label: str, batch):
    """Closed-form (y_ref, z_ref) on the batch, or None when unavailable."""
    if label in ("example1", "example2"):
        return reference_on_batch(label, batch)
    return None


def _constant_reference(config: RunConfig, batch):
    m, big_n = batch.n_paths, batch.grid.n_steps
    n_pairs = big_n * (big_n + 1) // 2
    y_ref = np.full((m, big_n, 1), config.level)
    z_ref = np.zeros((m, n_pairs, 1, 1))
    return y_ref, z_ref


# ---------------------------------------------------------------------------
# artifact helpers


def _ensure_out(out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir: str, command: str, config: RunConfig,
                    wall_time_s: float, status: str = "ok",
                    extra: dict | None = None) -> None:
    files = {}
    for name in sorted(os.listdir(out_dir)):
        if name == _MANIFEST_NAME:
            continue
        full = os.path.join(out_dir, name)
        if os.path.isfile(full):
            files[name] = "sha256:" + _sha256(full)
    doc = {
        "format": _MANIFEST_FORMAT,
        "command": command,
        "status": status,
        "config": config.to_dict(),
        "seed": config.seed,
        "wall_time_s": wall_time_s,
        "files": files,
    }
    if extra:
        doc.update(extra)
    with open(os.path.join(out_dir, _MANIFEST_NAME), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_y_series(fileobj, grid, y_hat, y_ref=None) -> None:
    """Per-time Y table: path-0 values and the cross-path mean, with the
    closed-form reference alongside when one exists."""
    value_dim = y_hat.shape[2]
    cols = ["n", "t"]
    for a in range(value_dim):
        cols += [f"y_hat_path0_{a}", f"y_hat_mean_{a}"]
    if y_ref is not None:
        for a in range(value_dim):
            cols += [f"y_ref_path0_{a}", f"y_ref_mean_{a}"]
    fileobj.write(",".join(cols) + "\n")
    hat_mean = y_hat.mean(axis=0)
    ref_mean = y_ref.mean(axis=0) if y_ref is not None else None
    for n in range(grid.n_steps):
        row = [str(n), _fmt(grid.nodes[n])]
        for a in range(value_dim):
            row += [_fmt(y_hat[0, n, a]), _fmt(hat_mean[n, a])]
        if y_ref is not None:
            for a in range(value_dim):
                row += [_fmt(y_ref[0, n, a]), _fmt(ref_mean[n, a])]
        fileobj.write(",".join(row) + "\n")


def _write_paths_csv(fileobj, batch) -> None:
    """Table `j,n,t,x_0..` of evaluation-path states (all grid nodes)."""
    dim = batch.state_dim
    fileobj.write("j,n,t," + ",".join(f"x_{a}" for a in range(dim)) + "\n")
    nodes = batch.grid.nodes
    for j in range(batch.n_paths):
        for n in range(len(nodes)):
            vals = ",".join(_fmt(batch.states[j, n, a]) for a in range(dim))
            fileobj.write("%d,%d,%s,%s\n" % (j, n, _fmt(nodes[n]), vals))


def _write_floor_stats(fileobj, grid, y_proj, kappa, barrier_values) -> None:
    """Table `n,t,floor,binding_fraction,mean_kappa,min_y,mean_y` on the
    evaluation batch (reflected runs only)."""
    fileobj.write("n,t,floor,binding_fraction,mean_kappa,min_y,mean_y\n")
    binding = (kappa > 0.0).any(axis=2).mean(axis=0)
    for n in range(grid.n_steps):
        fileobj.write("%d,%s,%s,%s,%s,%s,%s\n" % (
            n, _fmt(grid.nodes[n]), _fmt(barrier_values[n]),
            _fmt(binding[n]), _fmt(kappa[:, n, :].mean()),
            _fmt(y_proj[:, n, :].min()), _fmt(y_proj[:, n, :].mean())))


def _write_divergence(out_dir: str, err: TrainingError) -> None:
    state = err.last_state or {}
    losses = [float(x) for x in state.get("losses", [])]
    doc = {"message": str(err), "step": err.step,
           "epoch": state.get("epoch"), "losses": losses}
    with open(os.path.join(out_dir, "divergence.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands


def cmd_solve(config: RunConfig) -> int:
    """Train, evaluate on fresh paths, and write solution + metric CSVs."""
    t0 = time.perf_counter()
    built = _build_problem(config)
    reflected = isinstance(built, ReflectedProblem)
    base = built.base if reflected else built
    solver_config = config.solver_config()
    out_dir = _ensure_out(config.out)

    print("[solve] problem=%s N=%d M=%d epochs=%d lr=%s seed=%d "
          "path_mode=%s" % (config.problem, solver_config.n_steps,
                            solver_config.n_paths, solver_config.epochs,
                            _fmt(solver_config.learning_rate), config.seed,
                            solver_config.path_mode))
    try:
        if reflected:
            reflected_solution = train_reflected(
                built, solver_config, projection=config.projection)
            solution = reflected_solution.solution
        else:
            solution = train(base, solver_config)
    except TrainingError as err:
        _write_divergence(out_dir, err)
        _write_manifest(out_dir, "solve", config,
                        time.perf_counter() - t0, status="diverged",
                        extra={"diverged_step": err.step})
        print("[solve] training diverged at step %s; partial artifacts in %s"
              % (err.step, out_dir), file=sys.stderr)
        return EXIT_DIVERGED

    batch = evaluation_batch(base, solver_config)
    if reflected:
        y_hat, z_hat, kappa = evaluate_reflected(reflected_solution, batch)
    else:
        y_hat, z_hat = evaluate(solution, batch)
    grid = solution.grid

    with open(os.path.join(out_dir, "solution.json"), "w") as fh:
        if reflected:
            save_reflected(reflected_solution, fh)
        else:
            save_solution(solution, fh)

    if config.emit_metrics:
        for n, losses in enumerate(solution.training_losses):
            with open(os.path.join(out_dir, f"loss_step_{n}.csv"), "w") as fh:
                write_loss_csv(fh, losses)

    if config.problem == "constant":
        reference = _constant_reference(config, batch)
    else:
        reference = _reference_for(config.problem, batch)

    if reference is not None:
        y_ref, z_ref = reference
        report = l2_errors(y_ref, z_ref, y_hat, z_hat,
                           loss_curves=solution.training_losses)
        if config.emit_metrics:
            with open(os.path.join(out_dir, "metrics.csv"), "w") as fh:
                write_metrics_csv(fh, report)
            with open(os.path.join(out_dir, "mse_y.csv"), "w") as fh:
                write_mse_y_csv(fh, grid, report.mse_y_curve)
            with open(os.path.join(out_dir, "mse_z.csv"), "w") as fh:
                write_mse_z_csv(fh, grid, report.mse_z_surface)
        if config.emit_surfaces:
            with open(os.path.join(out_dir, "analytic_y.csv"), "w") as fh:
                write_analytic_y_csv(fh, grid, y_ref)
            with open(os.path.join(out_dir, "analytic_z.csv"), "w") as fh:
                write_analytic_z_csv(fh, grid, z_ref)
        print("[solve] e_y=%s e_z=%s er_y=%s er_z=%s" % (
            _fmt(report.e_y), _fmt(report.e_z),
            _fmt(report.er_y), _fmt(report.er_z)))
        y_ref_for_series = y_ref
    else:
        print("[solve] no closed-form reference for %r; "
              "error metrics skipped" % config.problem)
        y_ref_for_series = None

    with open(os.path.join(out_dir, "y_series.csv"), "w") as fh:
        _write_y_series(fh, grid, y_hat, y_ref_for_series)

    if reflected:
        with open(os.path.join(out_dir, "floor_stats.csv"), "w") as fh:
            _write_floor_stats(fh, grid, y_hat, kappa,
                               reflected_solution.barrier_values)

    if config.emit_paths:
        with open(os.path.join(out_dir, "paths.csv"), "w") as fh:
            _write_paths_csv(fh, batch)

    if config.emit_oracle:
        basis = RegressionBasis(degree=config.basis_degree)
        discrete = solve_discrete(base, grid, batch, basis)
        with open(os.path.join(out_dir, "oracle.csv"), "w") as fh:
            write_oracle_csv(fh, discrete)

    _write_manifest(out_dir, "solve", config, time.perf_counter() - t0)
    print("[solve] artifacts written to %s" % out_dir)
    return EXIT_OK


def cmd_oracle(config: RunConfig) -> int:
    """Discrete-scheme convergence study -> oracle_convergence.csv."""
    t0 = time.perf_counter()
    if config.problem not in ORACLE_PROBLEMS:
        raise ConfigError(
            "the oracle study needs a closed-form reference on a Brownian "
            f"state; supported problems: {', '.join(ORACLE_PROBLEMS)} "
            f"(got {config.problem!r})")
    out_dir = _ensure_out(config.out)
    basis = RegressionBasis(degree=config.basis_degree)
    m_paths = _QUICK["n_paths"] if config.quick else config.n_paths

    if config.problem == "constant":
        level = config.level
        problem = build_constant_problem(level, config.horizon)
        results = oracle_convergence(
            config.n_list, m_paths, basis, config.seed,
            refine=config.refine, horizon=config.horizon, problem=problem,
            y_reference=lambda t, b: np.full_like(
                np.asarray(b, dtype=np.float64), level),
            z_reference=lambda t, s: 0.0)
    else:
        results = oracle_convergence(
            config.n_list, m_paths, basis, config.seed,
            refine=config.refine, horizon=config.horizon)

    print("[oracle] problem=%s M=%d degree=%d refine=%d seed=%d"
          % (config.problem, m_paths, config.basis_degree, config.refine,
             config.seed))
    print("N,dt,err_y,err_z")
    for row in results:
        print("%d,%s,%s,%s" % (row["N"], _fmt(row["dt"]),
                               _fmt(row["err_y"]), _fmt(row["err_z"])))
    with open(os.path.join(out_dir, "oracle_convergence.csv"), "w") as fh:
        write_convergence_csv(fh, results)
    _write_manifest(out_dir, "oracle", config, time.perf_counter() - t0)
    print("[oracle] artifacts written to %s" % out_dir)
    return EXIT_OK


def cmd_bench(config: RunConfig) -> int:
    """Train both closed-form benchmarks and report L2 error tables."""
    t0 = time.perf_counter()
    out_dir = _ensure_out(config.out)
    solver_config = config.solver_config()
    rows = []
    for label in ("example1", "example2"):
        problem = (build_example1(horizon=config.horizon)
                   if label == "example1"
                   else build_example2(Example2Spec(horizon=config.horizon)))
        print("[bench] %s: N=%d M=%d epochs=%d seed=%d" % (
            label, solver_config.n_steps, solver_config.n_paths,
            solver_config.epochs, config.seed))
        solution = train(problem, solver_config)
        batch = evaluation_batch(problem, solver_config)
        y_hat, z_hat = evaluate(solution, batch)
        y_ref, z_ref = reference_on_batch(label, batch)
        report = l2_errors(y_ref, z_ref, y_hat, z_hat)
        rows.append((label, "Y", report.e_y, report.er_y))
        rows.append((label, "Z", report.e_z, report.er_z))

    header = "problem,quantity,l2,rel_l2"
    print(header)
    for label, quantity, l2, rel in rows:
        print("%s,%s,%s,%s" % (label, quantity, _fmt(l2), _fmt(rel)))
    with open(os.path.join(out_dir, "bench_report.csv"), "w") as fh:
        fh.write(header + "\n")
        for label, quantity, l2, rel in rows:
            fh.write("%s,%s,%s,%s\n" % (label, quantity, _fmt(l2),
                                        _fmt(rel)))
    _write_manifest(out_dir, "bench", config, time.perf_counter() - t0)
    print("[bench] artifacts written to %s" % out_dir)
    return EXIT_OK


def read_bench_report(path: str):
    """Parse bench_report.csv back into (problem, quantity, l2, rel) rows."""
    rows = []
    with open(path, "r") as fh:
        header = fh.readline().strip()
        if header != "problem,quantity,l2,rel_l2":
            raise InputError(f"unexpected bench report header {header!r}")
        for line in fh:
            label, quantity, l2, rel = line.strip().split(",")
            rows.append((label, quantity, float(l2), float(rel)))
    return rows


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volterra",
        description="Deep backward solver for Volterra-type backward "
                    "stochastic equations.")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "solve": "train on a problem and write solution + metric CSVs",
        "oracle": "discrete-scheme convergence study",
        "bench": "train both closed-form benchmarks and tabulate errors",
    }
    for name, desc in descriptions.items():
        cmd = sub.add_parser(name, help=desc, description=desc)
        cmd.add_argument("--problem", default=None,
                         help="problem id (example1, example2, regret-floor, "
                              "constant)")
        cmd.add_argument("--n-steps", dest="n_steps", type=int, default=None,
                         help="time steps N")
        cmd.add_argument("--n-paths", dest="n_paths", type=int, default=None,
                         help="simulated paths M")
        cmd.add_argument("--epochs", type=int, default=None,
                         help="training iterations per time step (0 = "
                              "untrained sanity run)")
        cmd.add_argument("--lr", dest="learning_rate", type=float,
                         default=None, help="Adam learning rate")
        cmd.add_argument("--seed", type=int, default=None,
                         help="master seed (falls back to $%s, then 0)"
                              % SEED_ENV_VAR)
        cmd.add_argument("--path-mode", dest="path_mode", default=None,
                         choices=("fresh", "frozen"),
                         help="new paths per epoch, or one frozen batch")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--threads", type=int, default=None,
                         help="cap backend worker threads")
        cmd.add_argument("--quick", action="store_true", default=False,
                         help="smoke-test sizes (N=10, M=1024, 100 epochs)")
        cmd.add_argument("--config", dest="config_file", default=None,
                         help="flat JSON config file (flags take precedence)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_CONFIG
        return code
    try:
        config = build_run_config(args)
        if config.threads is not None:
            backend.set_num_threads(config.threads)
        command = {"solve": cmd_solve, "oracle": cmd_oracle,
                   "bench": cmd_bench}[args.command]
        return command(config)
    except (ConfigError, InputError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingError as err:
        print(f"error: training diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except SimulationError as err:
        print(f"error: path simulation blew up: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
