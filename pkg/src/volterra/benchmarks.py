"""Closed-form reference solutions for two linear benchmark BSVIEs.

Example 1 — anticipatory linear problem on a Brownian state:
    g(t, x_t, x_T) = sin(πt)·x_T,  f(t,s,x_t,x_s,y,z) = e^{−(s−t)}·y + e^s·z,
with solution
    Y(t) = (sin(πt) + (cos(πt) − cos(πT))/π) · (B_t + e^T − e^t),
    Z(t,s) = sin(πt) + ∫_s^T e^{−(r−t)} (sin(πr) + (cos(πr) − cos(πT))/π) dr.
The derivation runs through a resolvent (Neumann) series for the kernel
e^{−(r−t)}, which sums to 1; `resolvent_kernel` exposes that machinery.

Example 2 — recursive valuation of a geometric Brownian motion X:
    g(t, x_t, x_T) = e^{−λt}·x_T,  f(t,s,x_t,x_s,y,z) = λ₀·x_s,
with solution
    Y(t)   = X_t · (e^{−λt} e^{α(T−t)} + λ₀ (e^{α(T−t)} − 1)/α),
    Z(t,s) = σ · X_s · (e^{−λt} e^{α(T−s)} + λ₀ (e^{α(T−s)} − 1)/α).
The kernel's X_s factor comes from E[D_s X_r | F_s] = σ X_s e^{α(r−s)} for
r ≥ s; a bump-and-revalue Monte Carlo oracle in the tests confirms it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev
from scipy.integrate import quad

from .errors import ConfigError, DomainError
from .solver import BsvieProblem

_CHEB_DEGREE = 48
_GL_ORDER = 64
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


@dataclass
class Example1Spec:
    """Anticipatory linear problem: kernel e^{−(r−t)}, weight e^r."""

    horizon: float = 1.0

    def terminal_weight(self, t):
        """sin(πt), the time weight on the terminal state."""
        return np.sin(np.pi * np.asarray(t, dtype=np.float64))

    def kernel(self, t, r):
        """e^{−(r−t)} for r ≥ t, zero otherwise."""
        t = np.asarray(t, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        return np.where(r >= t, np.exp(-(r - t)), 0.0)

    def weight(self, r):
        """e^r, the kernel-value weight in the generator."""
        return np.exp(np.asarray(r, dtype=np.float64))


@dataclass
class Example2Spec:
    """GBM valuation problem; defaults match the reference configuration."""

    alpha: float = 0.1       # forward drift
    sigma: float = 0.2       # forward volatility
    lam: float = 0.5         # terminal discount rate
    lam0: float = 0.5        # running-flow weight
    horizon: float = 1.0
    x0: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if self.lam < 0 or self.lam0 < 0:
            raise ConfigError("lam and lam0 must be >= 0")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not self.x0 > 0:
            raise ConfigError("x0 must be positive")

    def state(self, t, b_t):
        """X_t = x0 · exp((α − σ²/2) t + σ B_t)."""
        b_t = np.asarray(b_t, dtype=np.float64)
        return self.x0 * np.exp(
            (self.alpha - 0.5 * self.sigma ** 2) * t + self.sigma * b_t)

    def bracket(self, t, s):
        """e^{−λt} e^{α(T−s)} + λ₀ (e^{α(T−s)} − 1)/α  (limit branch at α=0)."""
        tau = self.horizon - s
        if self.alpha == 0.0:
            flow = self.lam0 * tau
        else:
            flow = self.lam0 * np.expm1(self.alpha * tau) / self.alpha
        return np.exp(-self.lam * t) * np.exp(self.alpha * tau) + flow


def _rho_values(rho, pts):
    vals = np.asarray(rho(pts), dtype=np.float64)
    if vals.ndim == 0:
        vals = np.full(pts.shape, float(vals))
    return vals


def resolvent_kernel(rho, x, n_terms: int):
    """Partial Neumann sum Σ_{k=1..n_terms} ρ^{*k}(x) of a convolution kernel.

    ρ^{*1} = ρ; ρ^{*k}(x) = ∫_0^x ρ^{*(k−1)}(u) ρ(x−u) du.  Iterated
    convolutions are represented as Chebyshev interpolants on [0, max(x)]
    and integrated by fixed-order Gauss–Legendre quadrature; the first term
    is evaluated exactly.  `rho` must accept numpy arrays.
    """
    n_terms = int(n_terms)
    if n_terms < 1:
        raise ConfigError(f"n_terms must be >= 1, got {n_terms}")
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    scalar = np.isscalar(x) or np.asarray(x).ndim == 0
    if np.any(x_arr < 0):
        raise DomainError("resolvent kernel defined for x >= 0")

    total = _rho_values(rho, x_arr)
    x_max = float(np.max(x_arr))
    if n_terms == 1 or x_max == 0.0:
        # higher convolutions vanish at 0, so x ≡ 0 is exact already
        return float(total[0]) if scalar else total.reshape(np.shape(x))

    half_nodes = 0.5 * (_GL_NODES + 1.0)   # Gauss–Legendre on [0, 1]

    def convolve_prev(prev_eval, pts):
        out = np.empty_like(pts)
        for i, c in enumerate(pts):
            u = c * half_nodes
            out[i] = 0.5 * c * np.dot(_GL_WEIGHTS,
                                      prev_eval(u) * _rho_values(rho, c - u))
        return out

    prev = Chebyshev.interpolate(lambda p: _rho_values(rho, p),
                                 deg=_CHEB_DEGREE, domain=[0.0, x_max])
    for _ in range(1, n_terms):
        cur = Chebyshev.interpolate(lambda p: convolve_prev(prev, p),
                                    deg=_CHEB_DEGREE, domain=[0.0, x_max])
        total = total + cur(x_arr)
        prev = cur
    return float(total[0]) if scalar else total.reshape(np.shape(x))


def analytic_y_ex1(t, b_t, horizon: float = 1.0):
    """Y(t) = (sin(πt) + (cos(πt) − cos(πT))/π) · (B_t + e^T − e^t)."""
    t = np.asarray(t, dtype=np.float64)
    b_t = np.asarray(b_t, dtype=np.float64)
    slope = np.sin(np.pi * t) + (np.cos(np.pi * t)
                                 - np.cos(np.pi * horizon)) / np.pi
    return slope * (b_t + np.exp(horizon) - np.exp(t))


_Z1_CACHE: dict = {}


def _z1_tail_integral(s: float, horizon: float) -> float:
    """∫_s^T e^{−r} (sin(πr) + (cos(πr) − cos(πT))/π) dr by adaptive
    quadrature (absolute tolerance 1e-10), cached per (s, T)."""
    key = (float(s), float(horizon))
    hit = _Z1_CACHE.get(key)
    if hit is None:
        cos_t = np.cos(np.pi * horizon)

        def integrand(r):
            return np.exp(-r) * (np.sin(np.pi * r)
                                 + (np.cos(np.pi * r) - cos_t) / np.pi)

        hit, _ = quad(integrand, s, horizon, epsabs=1e-10, epsrel=1e-12)
        _Z1_CACHE[key] = hit
    return hit


def analytic_z_ex1(t: float, s: float, horizon: float = 1.0) -> float:
    """Z(t,s) = sin(πt) + ∫_s^T e^{−(r−t)}(sin(πr) + (cos(πr)−cos(πT))/π) dr.

    Deterministic (no path dependence); requires 0 <= t <= s <= T.
    """
    t, s = float(t), float(s)
    if not 0.0 <= t <= s <= horizon:
        raise DomainError(f"need 0 <= t <= s <= {horizon}, got t={t}, s={s}")
    return float(np.sin(np.pi * t)
                 + np.exp(t) * _z1_tail_integral(s, horizon))


def analytic_y_ex2(t, b_t, spec: Example2Spec):
    """Y(t) = X_t · bracket(t, t) with X_t built from the Brownian value."""
    return spec.state(t, b_t) * spec.bracket(t, t)


def analytic_z_ex2(t: float, s: float, b_s, spec: Example2Spec):
    """Z(t,s) = σ · X_s · bracket(t, s); `b_s` is the Brownian value at the
    second (later) time s.  Requires t <= s <= T."""
    if not 0.0 <= t <= s <= spec.horizon:
        raise DomainError(
            f"need 0 <= t <= s <= {spec.horizon}, got t={t}, s={s}")
    return spec.sigma * spec.state(s, b_s) * spec.bracket(t, s)


def build_example1(horizon: float = 1.0) -> BsvieProblem:
    """Anticipatory linear problem on a pure Brownian state."""
    spec = Example1Spec(horizon=horizon)

    def generator(t, s, x_t, x_s, y, z):
        kern = float(np.exp(-(s - t))) if s >= t else 0.0
        return kern * y + np.exp(s) * z[:, :, 0]

    def generator_dy(t, s, x_t, x_s, y, z):
        kern = float(np.exp(-(s - t))) if s >= t else 0.0
        return np.full((x_t.shape[0], 1, 1), kern)

    def generator_dz(t, s, x_t, x_s, y, z):
        return np.full((x_t.shape[0], 1, 1, 1), float(np.exp(s)))

    def terminal(t, x_t, x_big_t):
        return np.sin(np.pi * t) * x_big_t

    return BsvieProblem(
        state_dim=1, value_dim=1, noise_dim=1,
        drift=lambda t, x: np.zeros_like(x),
        diffusion=lambda t, x: np.ones(x.shape + (1,)),
        generator=generator, terminal=terminal,
        generator_dy=generator_dy, generator_dz=generator_dz,
        x0=[0.0], horizon=horizon, label="example1")


def build_example2(spec: Example2Spec | None = None) -> BsvieProblem:
    """GBM valuation problem with exact forward simulation."""
    if spec is None:
        spec = Example2Spec()
    lam0 = spec.lam0

    def generator(t, s, x_t, x_s, y, z):
        return lam0 * x_s

    def generator_dy(t, s, x_t, x_s, y, z):
        return np.zeros((x_t.shape[0], 1, 1))

    def generator_dz(t, s, x_t, x_s, y, z):
        return np.zeros((x_t.shape[0], 1, 1, 1))

    def terminal(t, x_t, x_big_t):
        return np.exp(-spec.lam * t) * x_big_t

    return BsvieProblem(
        state_dim=1, value_dim=1, noise_dim=1,
        drift=lambda t, x: spec.alpha * x,
        diffusion=lambda t, x: (spec.sigma * x)[..., None],
        generator=generator, terminal=terminal,
        generator_dy=generator_dy, generator_dz=generator_dz,
        x0=[spec.x0], horizon=spec.horizon,
        exact_forward=True, gbm_drift=spec.alpha, gbm_vol=spec.sigma,
        label="example2")


def reference_on_batch(label: str, batch, spec=None):
    """Closed-form (Y, Z) on a simulated batch for a labelled benchmark.

    Returns (y_ref [M, N, 1], z_ref [M, P, 1, 1]) on the same grid layout as
    `solver.evaluate`: P pairs (n, k), 0 <= n <= k <= N−1, row-major in n.
    """
    grid = batch.grid
    big_n = grid.n_steps
    m_paths = batch.n_paths
    n_pairs = big_n * (big_n + 1) // 2
    y_ref = np.empty((m_paths, big_n, 1))
    z_ref = np.empty((m_paths, n_pairs, 1, 1))

    if label == "example1":
        horizon = grid.horizon
        for n in range(big_n):
            y_ref[:, n, 0] = analytic_y_ex1(grid.nodes[n],
                                            batch.states[:, n, 0], horizon)
        pos = 0
        for n in range(big_n):
            for k in range(n, big_n):
                z_ref[:, pos, 0, 0] = analytic_z_ex1(
                    grid.nodes[n], grid.nodes[k], horizon)
                pos += 1
    elif label == "example2":
        if spec is None:
            spec = Example2Spec(horizon=grid.horizon)
        for n in range(big_n):
            x_n = batch.states[:, n, 0]
            y_ref[:, n, 0] = x_n * spec.bracket(grid.nodes[n], grid.nodes[n])
        pos = 0
        for n in range(big_n):
            t_n = grid.nodes[n]
            for k in range(n, big_n):
                z_ref[:, pos, 0, 0] = (spec.sigma * batch.states[:, k, 0]
                                       * spec.bracket(t_n, grid.nodes[k]))
                pos += 1
    else:
        raise ConfigError(f"no closed-form reference for problem {label!r}")
    return y_ref, z_ref


def write_analytic_y_csv(fileobj, grid, y_ref) -> None:
    """Table `t,Y_analytic_mean` from per-path reference values [M, N, m]."""
    fileobj.write("t,Y_analytic_mean\n")
    means = np.asarray(y_ref).mean(axis=(0, 2))
    for n in range(grid.n_steps):
        fileobj.write("%.17g,%.17g\n" % (grid.nodes[n], means[n]))


def write_analytic_z_csv(fileobj, grid, z_ref) -> None:
    """Table `t,s,Z_analytic` (path mean) over the triangular pair grid."""
    fileobj.write("t,s,Z_analytic\n")
    means = np.asarray(z_ref).mean(axis=(0, 2, 3))
    pos = 0
    for n in range(grid.n_steps):
        for k in range(n, grid.n_steps):
            fileobj.write("%.17g,%.17g,%.17g\n"
                          % (grid.nodes[n], grid.nodes[k], means[pos]))
            pos += 1
