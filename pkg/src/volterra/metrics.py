"""Empirical L² error metrics for trained solutions against references.

Conventions (M paths, N time steps, value dim m, noise dim d):
  * Y arrays are [M, N, m]; the absolute error is
        e_y = (1/M) Σ_j Σ_n |Y_n^j − Ŷ_n^j|².
  * Z arrays are [M, P, m, d] over the P = N(N+1)/2 triangular pairs
    (n, k), 0 ≤ n ≤ k ≤ N−1, row-major in n (the layout produced by
    `solver.evaluate` and `benchmarks.reference_on_batch`);
        e_z = (1/M) Σ_j Σ_n Σ_{k≥n} |Z^j(t_n,t_k) − Ẑ^j(t_n,t_k)|².
  * Relative errors divide by the same functional applied to the reference
    alone; a zero reference mass flags the relative error as undefined
    (stored as NaN) while the absolute error is still reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .paths import triangular_pairs

__all__ = [
    "ErrorReport", "l2_errors", "mse_curve", "mse_surface",
    "write_metrics_csv", "write_mse_y_csv", "write_mse_z_csv",
    "write_loss_csv",
]


@dataclass
class ErrorReport:
    """Absolute and relative L² errors plus their time-resolved breakdowns."""

    e_y: float
    e_z: float
    er_y: float                 # NaN when the Y reference mass is zero
    er_z: float                 # NaN when the Z reference mass is zero
    ref_mass_y: float
    ref_mass_z: float
    rel_y_defined: bool
    rel_z_defined: bool
    mse_y_curve: np.ndarray     # [N] per-time-index mean squared error
    mse_z_surface: np.ndarray   # [P] per-pair mean squared error, k >= n
    loss_curves: list = field(default_factory=list)


def _check_pair(name: str, ref, hat, ndim: int) -> tuple:
    ref = np.asarray(ref, dtype=np.float64)
    hat = np.asarray(hat, dtype=np.float64)
    if ref.shape != hat.shape:
        raise ShapeError(f"{name}: reference shape {ref.shape} != "
                         f"approximation shape {hat.shape}")
    if ref.ndim != ndim:
        raise ShapeError(f"{name}: expected {ndim}-d arrays, got {ref.ndim}-d")
    return ref, hat


def mse_curve(y_ref, y_hat) -> np.ndarray:
    """Per-time-index mean squared error: curve[n] = (1/M) Σ_j |Y−Ŷ|²."""
    y_ref, y_hat = _check_pair("Y", y_ref, y_hat, 3)
    return np.square(y_hat - y_ref).sum(axis=2).mean(axis=0)


def mse_surface(z_ref, z_hat) -> np.ndarray:
    """Per-pair mean squared error over the triangular (n, k) grid."""
    z_ref, z_hat = _check_pair("Z", z_ref, z_hat, 4)
    return np.square(z_hat - z_ref).sum(axis=(2, 3)).mean(axis=0)


def l2_errors(y_ref, z_ref, y_hat, z_hat, loss_curves=None) -> ErrorReport:
    """Absolute and relative L² errors of (Ŷ, Ẑ) against references.

    Zero reference mass makes the corresponding relative error undefined:
    it is stored as NaN with its `rel_*_defined` flag cleared.
    """
    curve = mse_curve(y_ref, y_hat)
    surface = mse_surface(z_ref, z_hat)
    e_y = float(curve.sum())
    e_z = float(surface.sum())

    ref_mass_y = float(np.square(np.asarray(y_ref, dtype=np.float64))
                       .sum(axis=2).mean(axis=0).sum())
    ref_mass_z = float(np.square(np.asarray(z_ref, dtype=np.float64))
                       .sum(axis=(2, 3)).mean(axis=0).sum())

    rel_y_defined = ref_mass_y > 0.0
    rel_z_defined = ref_mass_z > 0.0
    er_y = e_y / ref_mass_y if rel_y_defined else float("nan")
    er_z = e_z / ref_mass_z if rel_z_defined else float("nan")

    return ErrorReport(
        e_y=e_y, e_z=e_z, er_y=er_y, er_z=er_z,
        ref_mass_y=ref_mass_y, ref_mass_z=ref_mass_z,
        rel_y_defined=rel_y_defined, rel_z_defined=rel_z_defined,
        mse_y_curve=curve, mse_z_surface=surface,
        loss_curves=list(loss_curves) if loss_curves is not None else [])


def write_metrics_csv(fileobj, report: ErrorReport) -> None:
    """Four-scalar table `metric,value`; undefined relatives emit `nan`."""
    fileobj.write("metric,value\n")
    for name, value in (("e_y", report.e_y), ("e_z", report.e_z),
                        ("er_y", report.er_y), ("er_z", report.er_z)):
        fileobj.write("%s,%.17g\n" % (name, value))


def write_mse_y_csv(fileobj, grid, curve) -> None:
    """Table `n,t,mse` over grid nodes."""
    curve = np.asarray(curve)
    if curve.shape != (grid.n_steps,):
        raise ShapeError(f"curve length {curve.shape} does not match "
                         f"{grid.n_steps} grid steps")
    fileobj.write("n,t,mse\n")
    for n in range(grid.n_steps):
        fileobj.write("%d,%.17g,%.17g\n" % (n, grid.nodes[n], curve[n]))


def write_mse_z_csv(fileobj, grid, surface) -> None:
    """Table `n,k,t_n,t_k,mse` over the triangular pair grid."""
    surface = np.asarray(surface)
    n_pairs = grid.n_steps * (grid.n_steps + 1) // 2
    if surface.shape != (n_pairs,):
        raise ShapeError(f"surface length {surface.shape} does not match "
                         f"{n_pairs} triangular pairs")
    fileobj.write("n,k,t_n,t_k,mse\n")
    rows, cols = triangular_pairs(grid.n_steps)
    for pos, (n, k) in enumerate(zip(rows, cols)):
        fileobj.write("%d,%d,%.17g,%.17g,%.17g\n"
                      % (n, k, grid.nodes[n], grid.nodes[k], surface[pos]))


def write_loss_csv(fileobj, losses) -> None:
    """Table `epoch,loss` for one training step's loss history."""
    fileobj.write("epoch,loss\n")
    for epoch, loss in enumerate(np.asarray(losses, dtype=np.float64)):
        fileobj.write("%d,%.17g\n" % (epoch, loss))
