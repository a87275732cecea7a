"""Pure-numpy backend for dense tanh-network passes.

Mirrors the compiled `_kernels` call surface exactly; used when the extension
is unavailable or when `VOLTERRA_BACKEND=python` forces it.  Batches are
feature-major (dim, rows), matching the compiled layout.
"""

from __future__ import annotations

import numpy as np

NAME = "python"

_num_threads = 1


def set_num_threads(n: int) -> None:
    # Kept for interface parity; numpy's reductions are already deterministic.
    global _num_threads
    _num_threads = max(1, int(n))


def get_num_threads() -> int:
    return _num_threads


def forward_cached_t(weights, biases, x_t):
    """Return (output, hidden activations), all feature-major (dim, rows)."""
    acts = []
    h = x_t
    last = len(weights) - 1
    for l, (w, b) in enumerate(zip(weights, biases)):
        h = w @ h + b[:, None]
        if l < last:
            np.tanh(h, out=h)
            acts.append(h)
    return h, acts


def forward_t(weights, biases, x_t):
    out, _ = forward_cached_t(weights, biases, x_t)
    return out


def backward_t(weights, biases, x_t, acts, grad_out_t):
    """Parameter gradients for sum(loss) given d loss/d output (transposed)."""
    n_layers = len(weights)
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    delta = grad_out_t
    for l in range(n_layers - 1, -1, -1):
        hp = acts[l - 1] if l > 0 else x_t
        d_weights[l] = delta @ hp.T
        d_biases[l] = delta.sum(axis=1)
        if l > 0:
            delta = (weights[l].T @ delta) * (1.0 - hp * hp)
    return d_weights, d_biases


def forward_cached_ws(weights, biases, x_t, ws):
    """Forward pass writing into preallocated workspace buffers.

    Fills ws.acts / ws.out and returns ws.out; no heap allocation.
    """
    h = x_t
    last = len(weights) - 1
    for l, (w, b) in enumerate(zip(weights, biases)):
        dst = ws.acts[l] if l < last else ws.out
        np.matmul(w, h, out=dst)
        dst += b[:, None]
        if l < last:
            np.tanh(dst, out=dst)
        h = dst
    return ws.out


def backward_ws(weights, biases, x_t, ws, grad_out_t):
    """Backward pass using ws.acts from the latest forward_cached_ws call.

    Returns (ws.d_weights, ws.d_biases); all writes go to workspace buffers.
    """
    n_layers = len(weights)
    delta = grad_out_t
    parity = 0
    for l in range(n_layers - 1, -1, -1):
        hp = ws.acts[l - 1] if l > 0 else x_t
        np.matmul(delta, hp.T, out=ws.d_weights[l])
        np.sum(delta, axis=1, out=ws.d_biases[l])
        if l > 0:
            in_dim = weights[l].shape[1]
            nxt = (ws.delta_a if parity == 0 else ws.delta_b)[:in_dim]
            parity ^= 1
            np.matmul(weights[l].T, delta, out=nxt)
            tmp = ws.tmp[:in_dim]
            np.multiply(hp, hp, out=tmp)
            np.subtract(1.0, tmp, out=tmp)
            nxt *= tmp
            delta = nxt
    return ws.d_weights, ws.d_biases
