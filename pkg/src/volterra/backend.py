"""Kernel backend selection: compiled extension when built, numpy otherwise.

Set ``VOLTERRA_BACKEND=python`` or ``VOLTERRA_BACKEND=compiled`` to force a
choice (forcing ``compiled`` raises if the extension is missing).
"""

from __future__ import annotations

import os

_requested = os.environ.get("VOLTERRA_BACKEND", "").strip().lower()

if _requested not in ("", "compiled", "python"):
    raise ImportError(
        f"VOLTERRA_BACKEND={_requested!r} not recognized; "
        "use 'compiled' or 'python'"
    )

if _requested == "python":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _kernels_py as _impl

NAME: str = _impl.NAME
forward_t = _impl.forward_t
forward_cached_t = _impl.forward_cached_t
backward_t = _impl.backward_t
forward_cached_ws = _impl.forward_cached_ws
backward_ws = _impl.backward_ws
set_num_threads = _impl.set_num_threads
get_num_threads = _impl.get_num_threads

_GRAD_CHUNK = 1024


class Workspace:
    """Preallocated buffers for repeated passes at fixed (layer_dims, rows).

    Used by the training loop to avoid re-allocating multi-MB activation and
    gradient arrays every epoch; all arrays are feature-major (dim, rows).
    """

    def __init__(self, layer_dims, rows: int):
        import numpy as np

        dims = [int(d) for d in layer_dims]
        rows = int(rows)
        self.layer_dims = dims
        self.rows = rows
        self.acts = [np.empty((w, rows)) for w in dims[1:-1]]
        self.out = np.empty((dims[-1], rows))
        self.grad_out = np.empty((dims[-1], rows))
        max_w = max(dims[1:])
        self.delta_a = np.empty((max_w, rows))
        self.delta_b = np.empty((max_w, rows))
        self.tmp = np.empty((max_w, rows))
        self.d_weights = [np.empty((dims[i + 1], dims[i]))
                          for i in range(len(dims) - 1)]
        self.d_biases = [np.empty(dims[i + 1]) for i in range(len(dims) - 1)]
        n_chunks = (rows + _GRAD_CHUNK - 1) // _GRAD_CHUNK
        stride = max((dims[i + 1]) * (dims[i] + 1)
                     for i in range(len(dims) - 1))
        self.scratch = np.empty(n_chunks * stride)
