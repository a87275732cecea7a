#!/usr/bin/env python3
"""Benchmark the compiled kernel extension against the numpy fallback.

Runs the dense-network forward/backward passes both ways at training-realistic
shapes and prints a timing table.  Usage:

    python3 benchmarks/bench_kernels.py [--rows N] [--repeats K]

The compiled backend is optional; if the extension is not built the script
reports fallback timings only.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from volterra.backend import Workspace

try:
    from volterra import _kernels as compiled
except ImportError:  # extension not built
    compiled = None
from volterra import _kernels_py as fallback


def make_problem(layer_dims, rows, seed=0):
    rng = np.random.default_rng(seed)
    weights = [rng.standard_normal((layer_dims[i + 1], layer_dims[i]))
               for i in range(len(layer_dims) - 1)]
    biases = [rng.standard_normal(layer_dims[i + 1])
              for i in range(len(layer_dims) - 1)]
    x_t = np.ascontiguousarray(rng.standard_normal((rows, layer_dims[0])).T)
    g_t = np.ascontiguousarray(rng.standard_normal((rows, layer_dims[-1])).T)
    return weights, biases, x_t, g_t


def time_backend(mod, layer_dims, rows, repeats):
    weights, biases, x_t, g_t = make_problem(layer_dims, rows)
    ws = Workspace(layer_dims, rows)
    mod.forward_cached_ws(weights, biases, x_t, ws)
    mod.backward_ws(weights, biases, x_t, ws, g_t)  # warm-up

    t0 = time.perf_counter()
    for _ in range(repeats):
        mod.forward_cached_ws(weights, biases, x_t, ws)
    t_fwd = (time.perf_counter() - t0) / repeats

    t0 = time.perf_counter()
    for _ in range(repeats):
        mod.forward_cached_ws(weights, biases, x_t, ws)
        mod.backward_ws(weights, biases, x_t, ws, g_t)
    t_both = (time.perf_counter() - t0) / repeats

    return t_fwd, t_both - t_fwd


def check_agreement(layer_dims, rows=4096):
    """Max |compiled - fallback| over outputs and parameter gradients."""
    weights, biases, x_t, g_t = make_problem(layer_dims, rows)
    results = []
    for mod in (compiled, fallback):
        ws = Workspace(layer_dims, rows)
        out = mod.forward_cached_ws(weights, biases, x_t, ws)
        d_w, d_b = mod.backward_ws(weights, biases, x_t, ws, g_t)
        results.append((out.copy(), [w.copy() for w in d_w],
                        [b.copy() for b in d_b]))
    (o1, w1, b1), (o2, w2, b2) = results
    gap = np.max(np.abs(o1 - o2))
    for a, b in zip(w1 + b1, w2 + b2):
        gap = max(gap, np.max(np.abs(a - b)))
    return gap


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=409600,
                        help="batch rows (default: 409600, the largest "
                             "training batch at default settings)")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    shapes = {
        "value net  [2,11,11,11,1]": [2, 11, 11, 11, 1],
        "kernel net [4,11,11,11,1]": [4, 11, 11, 11, 1],
    }

    print(f"rows={args.rows}  repeats={args.repeats}")
    if compiled is None:
        print("compiled extension not built; timing fallback only\n")
    header = f"{'shape':28s} {'pass':9s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, dims in shapes.items():
        py_fwd, py_bwd = time_backend(fallback, dims, args.rows, args.repeats)
        if compiled is not None:
            c_fwd, c_bwd = time_backend(compiled, dims, args.rows, args.repeats)
        else:
            c_fwd = c_bwd = float("nan")
        for name, py_t, c_t in (("forward", py_fwd, c_fwd),
                                ("backward", py_bwd, c_bwd)):
            ratio = py_t / c_t if c_t == c_t and c_t > 0 else float("nan")
            print(f"{label:28s} {name:9s} {py_t * 1e3:9.2f}ms "
                  f"{c_t * 1e3:9.2f}ms {ratio:7.2f}x")

    if compiled is not None:
        gap = check_agreement([4, 11, 11, 11, 1])
        print(f"\nmax |compiled - python| over outputs and gradients: {gap:.3e}")


if __name__ == "__main__":
    main()
