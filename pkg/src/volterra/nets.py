"""Dense feedforward networks with exact reverse-mode gradients and Adam.

tanh on hidden layers, affine output, float64 throughout.  This is the only
learning machinery the solver uses; heavy lifting is delegated to the kernel
backend (compiled C or numpy, see `backend`).
"""

from __future__ import annotations

import numpy as np

from . import backend
from .errors import InputError, ShapeError, TrainingError
from .rng import TAG_INIT, substream


class MlpNet:
    """Network parameters: weights[l] is (layer_dims[l+1], layer_dims[l])."""

    __slots__ = ("layer_dims", "weights", "biases")

    def __init__(self, layer_dims, weights, biases):
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2:
            raise ShapeError("need at least input and output dims")
        if any(d < 1 for d in layer_dims):
            raise ShapeError(f"non-positive layer dim in {layer_dims}")
        if len(weights) != len(layer_dims) - 1 or len(biases) != len(weights):
            raise ShapeError("parameter count does not match layer_dims")
        for l, (w, b) in enumerate(zip(weights, biases)):
            want = (layer_dims[l + 1], layer_dims[l])
            if w.shape != want:
                raise ShapeError(f"weights[{l}] shape {w.shape}, expected {want}")
            if b.shape != (layer_dims[l + 1],):
                raise ShapeError(f"biases[{l}] shape {b.shape}")
        self.layer_dims = layer_dims
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in biases]

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpNet":
        return MlpNet(self.layer_dims, [w.copy() for w in self.weights],
                      [b.copy() for b in self.biases])


class GradBundle:
    """Parameter gradients plus the forward activations they came from."""

    __slots__ = ("d_weights", "d_biases", "activations", "output")

    def __init__(self, d_weights, d_biases, activations=None, output=None):
        self.d_weights = d_weights
        self.d_biases = d_biases
        self.activations = activations
        self.output = output


class AdamState:
    """Adam moment buffers congruent to one network's parameter layout."""

    __slots__ = ("m_weights", "v_weights", "m_biases", "v_biases",
                 "step_count", "beta1", "beta2", "epsilon", "learning_rate")

    def __init__(self, net: MlpNet, learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-8):
        self.m_weights = [np.zeros_like(w) for w in net.weights]
        self.v_weights = [np.zeros_like(w) for w in net.weights]
        self.m_biases = [np.zeros_like(b) for b in net.biases]
        self.v_biases = [np.zeros_like(b) for b in net.biases]
        self.step_count = 0
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.learning_rate = float(learning_rate)


def init_net(layer_dims, rng_seed) -> MlpNet:
    """Glorot-uniform weights (a = sqrt(6/(fan_in+fan_out))), zero biases."""
    layer_dims = [int(d) for d in layer_dims]
    if not layer_dims:
        raise ShapeError("empty layer_dims")
    rng = substream(rng_seed, TAG_INIT)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpNet(layer_dims, weights, biases)


def _check_batch(net: MlpNet, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ShapeError(
            f"batch shape {batch.shape} incompatible with input dim "
            f"{net.input_dim}")
    if not np.isfinite(batch).all():
        raise InputError("non-finite entries in input batch")
    return batch


def forward(net: MlpNet, batch: np.ndarray, check: bool = True) -> np.ndarray:
    """Network output, one row per batch row."""
    if check:
        batch = _check_batch(net, batch)
    x_t = np.ascontiguousarray(batch.T)
    out_t = backend.forward_t(net.weights, net.biases, x_t)
    return np.ascontiguousarray(out_t.T)


def forward_cached(net: MlpNet, batch: np.ndarray, check: bool = True):
    """Like `forward` but also returns the activation cache for `backward`."""
    if check:
        batch = _check_batch(net, batch)
    x_t = np.ascontiguousarray(batch.T)
    out_t, acts = backend.forward_cached_t(net.weights, net.biases, x_t)
    return np.ascontiguousarray(out_t.T), (x_t, acts)


def backward(net: MlpNet, batch: np.ndarray, loss_grad: np.ndarray,
             cache=None) -> GradBundle:
    """Exact d loss/d params given d loss/d output at forward(net, batch)."""
    loss_grad = np.asarray(loss_grad, dtype=np.float64)
    if cache is None:
        out, cache = forward_cached(net, batch)
    x_t, acts = cache
    if loss_grad.shape != (x_t.shape[1], net.output_dim):
        raise ShapeError(
            f"loss_grad shape {loss_grad.shape}, expected "
            f"{(x_t.shape[1], net.output_dim)}")
    g_t = np.ascontiguousarray(loss_grad.T)
    d_weights, d_biases = backend.backward_t(net.weights, net.biases, x_t,
                                             acts, g_t)
    return GradBundle(d_weights, d_biases, activations=acts)


def adam_step(net: MlpNet, state: AdamState, grads: GradBundle):
    """One Adam update with bias correction; mutates and returns (net, state)."""
    for l, g in enumerate(grads.d_weights):
        if not np.isfinite(g).all():
            raise TrainingError("non-finite weight gradient", layer_index=l)
    for l, g in enumerate(grads.d_biases):
        if not np.isfinite(g).all():
            raise TrainingError("non-finite bias gradient", layer_index=l)
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    lr, eps = state.learning_rate, state.epsilon
    params = (list(zip(net.weights, grads.d_weights, state.m_weights,
                       state.v_weights))
              + list(zip(net.biases, grads.d_biases, state.m_biases,
                         state.v_biases)))
    for l, (p, g, m, v) in enumerate(params):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        if not np.isfinite(p).all():
            raise TrainingError("non-finite parameter after update",
                                layer_index=l % len(net.weights))
    return net, state
