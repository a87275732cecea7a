# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for dense tanh-network forward/backward passes.

Same call surface as `_kernels_py`; batches are handled in feature-major
(transposed) layout so the C inner loops stream unit-stride.
"""

import numpy as np

cdef extern from "kernels_impl.h":
    void vt_set_threads(int n) nogil
    int vt_get_threads() nogil
    void vt_dense_forward_t(const double *hp, const double *w, const double *b,
                            double *out, long long rows, int in_dim,
                            int out_dim, int apply_tanh) nogil
    void vt_backward_delta_t(const double *delta, const double *w,
                             const double *hp, double *dprev, long long rows,
                             int in_dim, int out_dim) nogil
    void vt_backward_params_t(const double *delta, const double *hp,
                              double *dw, double *db, double *scratch,
                              long long rows, int in_dim, int out_dim) nogil

cdef long long _GRAD_CHUNK = 1024

NAME = "compiled"


def set_num_threads(n):
    vt_set_threads(int(n))


def get_num_threads():
    return vt_get_threads()


cdef _layer_forward(double[:, ::1] hp, double[:, ::1] w, double[::1] b,
                    double[:, ::1] out, bint apply_tanh):
    cdef long long rows = hp.shape[1]
    cdef int in_dim = hp.shape[0]
    cdef int out_dim = w.shape[0]
    with nogil:
        vt_dense_forward_t(&hp[0, 0], &w[0, 0], &b[0], &out[0, 0],
                           rows, in_dim, out_dim, apply_tanh)


cdef _layer_params(double[:, ::1] delta, double[:, ::1] hp,
                   double[:, ::1] dw, double[::1] db, double[::1] scratch):
    cdef long long rows = hp.shape[1]
    with nogil:
        vt_backward_params_t(&delta[0, 0], &hp[0, 0], &dw[0, 0], &db[0],
                             &scratch[0], rows, dw.shape[1], dw.shape[0])


cdef _layer_delta(double[:, ::1] delta, double[:, ::1] w, double[:, ::1] hp,
                  double[:, ::1] dprev):
    cdef long long rows = hp.shape[1]
    with nogil:
        vt_backward_delta_t(&delta[0, 0], &w[0, 0], &hp[0, 0], &dprev[0, 0],
                            rows, w.shape[1], w.shape[0])


def forward_cached_t(list weights, list biases, object x_t):
    """Return (output, hidden activations), all feature-major (dim, rows)."""
    cdef int n_layers = len(weights)
    cdef int l
    acts = []
    h = x_t
    for l in range(n_layers):
        out = np.empty((weights[l].shape[0], h.shape[1]), dtype=np.float64)
        _layer_forward(h, weights[l], biases[l], out, l < n_layers - 1)
        if l < n_layers - 1:
            acts.append(out)
        h = out
    return h, acts


def forward_t(list weights, list biases, object x_t):
    out, _ = forward_cached_t(weights, biases, x_t)
    return out


def backward_t(list weights, list biases, object x_t, list acts,
               object grad_out_t):
    """Parameter gradients for sum(loss) given d loss/d output (transposed)."""
    cdef int n_layers = len(weights)
    cdef int l
    cdef long long rows, n_chunks
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    delta = grad_out_t
    for l in range(n_layers - 1, -1, -1):
        hp = acts[l - 1] if l > 0 else x_t
        rows = hp.shape[1]
        n_chunks = (rows + _GRAD_CHUNK - 1) // _GRAD_CHUNK
        dw = np.empty_like(weights[l])
        db = np.empty_like(biases[l])
        scratch = np.empty(n_chunks * dw.shape[0] * (dw.shape[1] + 1),
                           dtype=np.float64)
        _layer_params(delta, hp, dw, db, scratch)
        d_weights[l] = dw
        d_biases[l] = db
        if l > 0:
            dprev = np.empty_like(hp)
            _layer_delta(delta, weights[l], hp, dprev)
            delta = dprev
    return d_weights, d_biases


def forward_cached_ws(list weights, list biases, object x_t, object ws):
    """Forward pass writing into preallocated workspace buffers."""
    cdef int n_layers = len(weights)
    cdef int l
    acts = ws.acts
    out = ws.out
    h = x_t
    for l in range(n_layers):
        dst = acts[l] if l < n_layers - 1 else out
        _layer_forward(h, weights[l], biases[l], dst, l < n_layers - 1)
        h = dst
    return out


def backward_ws(list weights, list biases, object x_t, object ws,
                object grad_out_t):
    """Backward pass using ws.acts from the latest forward_cached_ws call."""
    cdef int n_layers = len(weights)
    cdef int l, parity = 0
    cdef int in_dim
    acts = ws.acts
    d_weights = ws.d_weights
    d_biases = ws.d_biases
    delta = grad_out_t
    for l in range(n_layers - 1, -1, -1):
        hp = acts[l - 1] if l > 0 else x_t
        _layer_params(delta, hp, d_weights[l], d_biases[l], ws.scratch)
        if l > 0:
            in_dim = weights[l].shape[1]
            nxt = (ws.delta_a if parity == 0 else ws.delta_b)[:in_dim]
            parity ^= 1
            _layer_delta(delta, weights[l], hp, nxt)
            delta = nxt
    return d_weights, d_biases
