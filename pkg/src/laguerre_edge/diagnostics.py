"""Linearisation of the R-recursion and numerical checks of its lemmas.

Replacing ``1/(1 - R_{i-1})`` by ``1`` turns the recursion into
``L_i = xi_i + omega_i L_{i-1}`` (``L_3 = xi_3``) with

    xi_i = alpha_i + beta_i (1 + tau_{i-1}) + alpha_{i-1} delta_i,
    X_i  = (1 + tau_{i-1}) (delta_i alpha_{i-1} + beta_i),
    Y_i  = X_i + omega_i Y_{i-1},  Y_3 = X_3,

so that ``L_j = Y_j + alpha_j - omega_3...omega_j alpha_2``.  The X_i are
independent, which is what makes ``sum L_i`` tractable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import TridiagonalSample
from .geometry import EdgeGeometry
from .logdet import RecursionTrace, noise_variables, run_recursion_batch

__all__ = [
    "DecompositionTrace",
    "SubGammaParams",
    "build_decomposition",
    "build_decomposition_batch",
    "a0_sum",
    "variance_sum",
    "b3_star_sum",
    "lyapunov_ratio",
    "subgamma_params",
    "subgamma_moment_bound",
    "tail_check",
    "TailCheck",
    "noise_sampler",
    "linearization_gap",
    "linearization_gap_batch",
]


@dataclass(frozen=True, eq=False)
class DecompositionTrace:
    """Linearised quantities for one sample (1-based, NaN-padded).

    ``alpha_v`` on 1..n, ``beta_v`` on 2..n, ``xi``/``x``/``l``/``y`` on 3..n.
    ``sum_l`` is ``sum_{i=3}^n L_i`` and ``b3_star_sum`` is
    ``sum_{i=4}^n (g_i - 1) L_{i-1}^2``.
    """

    alpha_v: np.ndarray
    beta_v: np.ndarray
    xi: np.ndarray
    x: np.ndarray
    l: np.ndarray
    y: np.ndarray
    sum_l: float
    a0_sum: float
    b3_star_sum: float


def _linear_recursion(drive, omega, start):
    """``out[i] = drive[i] + omega[i] out[i-1]`` for i > start, ``out[start] = drive[start]``.

    ``drive`` is index-major: shape ``(n+1,)`` or ``(n+1, k)``.
    """
    out = np.full(drive.shape, np.nan)
    acc = drive[start].copy() if drive.ndim > 1 else float(drive[start])
    out[start] = acc
    om = omega.tolist()
    for i in range(start + 1, drive.shape[0]):
        acc = drive[i] + om[i] * acc
        out[i] = acc
    return out


def _components(a_sq, b_sq, geometry: EdgeGeometry):
    """alpha, beta, xi, X, L, Y as index-major arrays ``(n+1, ...)``."""
    n = geometry.n
    if n < 4:
        raise ValueError("the decomposition needs n >= 4")
    av, bv = noise_variables(a_sq, b_sq, geometry)
    av, bv = np.moveaxis(av, -1, 0), np.moveaxis(bv, -1, 0)
    tail = (1,) * (av.ndim - 1)
    tau = geometry.tau.reshape((-1,) + tail)
    delta = geometry.delta.reshape((-1,) + tail)
    xi = np.full(av.shape, np.nan)
    x = np.full(av.shape, np.nan)
    xi[3:] = av[3:] + bv[3:] * (1.0 + tau[2:-1]) + av[2:-1] * delta[3:]
    x[3:] = (1.0 + tau[2:-1]) * (delta[3:] * av[2:-1] + bv[3:])
    l = _linear_recursion(xi, geometry.omega, 3)
    y = _linear_recursion(x, geometry.omega, 3)
    return av, bv, xi, x, l, y


def _b3_star(l, geometry):
    n = geometry.n
    g = geometry.g[4:n + 1].reshape((-1,) + (1,) * (l.ndim - 1))
    return np.sum((g - 1.0) * l[3:n] ** 2, axis=0)


def build_decomposition(sample: TridiagonalSample, geometry: EdgeGeometry) -> DecompositionTrace:
    av, bv, xi, x, l, y = _components(sample.a_sq, sample.b_sq, geometry)
    return DecompositionTrace(
        alpha_v=av, beta_v=bv, xi=xi, x=x, l=l, y=y,
        sum_l=float(np.sum(l[3:])),
        a0_sum=a0_sum(geometry),
        b3_star_sum=float(_b3_star(l, geometry)),
    )


def build_decomposition_batch(a_sq, b_sq, geometry: EdgeGeometry):
    """``(sum_l, b3_star_sum)`` arrays for a ``(k, n)`` stack of samples."""
    _, _, _, _, l, _ = _components(np.atleast_2d(a_sq), np.atleast_2d(b_sq), geometry)
    return np.sum(l[3:], axis=0), _b3_star(l, geometry)


def a0_sum(geometry: EdgeGeometry) -> float:
    """Deterministic drift ``sum_{i=3}^n g_{i+1} (gamma_i - omega_i)``."""
    n = geometry.n
    i = np.arange(3, n + 1)
    return float(np.sum(geometry.g[i + 1] * geometry.gamma_minus_omega[i]))


def variance_sum(geometry: EdgeGeometry, alpha: float | None = None) -> float:
    """``sum_{i=3}^n g_{i+1}^2 E X_i^2``, the variance of the linear statistic.

    ``alpha`` defaults to the geometry's own; E X_i^2 is linear in it.
    """
    n = geometry.n
    i = np.arange(3, n + 1)
    ex2 = geometry.expected_x_sq()[i]
    if alpha is not None:
        ex2 = ex2 * (alpha / geometry.params.alpha)
    return float(np.sum(geometry.g[i + 1] ** 2 * ex2))


def b3_star_sum(trace: DecompositionTrace, geometry: EdgeGeometry) -> float:
    return float(_b3_star(trace.l, geometry))


@dataclass(frozen=True)
class SubGammaParams:
    v: float
    u: float
    target: str


def subgamma_params(i: int, geometry: EdgeGeometry, target: str) -> SubGammaParams:
    """Sub-gamma ``(v, u)`` for ``alpha_i``, ``beta_i`` or ``X_i``."""
    alpha = geometry.params.alpha
    rp = geometry.rho_plus[i]
    if target == "alpha_i":
        return SubGammaParams(alpha * geometry.tau[i] / rp, alpha / rp, target)
    if target == "beta_i":
        return SubGammaParams(alpha * geometry.delta[i] / rp, alpha / rp, target)
    if target == "x_i":
        lift = 1.0 + geometry.tau[i - 1]
        v = alpha * geometry.delta[i] / rp * (geometry.omega[i] + 1.0) * lift ** 2
        return SubGammaParams(v, alpha * lift / rp, target)
    raise ValueError(f"unknown sub-gamma target {target!r}")


def subgamma_moment_bound(v, u, p: int = 4):
    """Moment envelope ``(p/2)! (8v)^{p/2} + p! (4u)^p`` for even ``p``."""
    return math.factorial(p // 2) * (8.0 * v) ** (p / 2) + math.factorial(p) * (4.0 * u) ** p


def lyapunov_ratio(geometry: EdgeGeometry) -> float:
    """``sum g^4 E X^4 / (sum g^2 E X^2)^2`` with E X^4 replaced by its moment envelope."""
    n = geometry.n
    i = np.arange(3, n + 1)
    alpha = geometry.params.alpha
    lift = 1.0 + geometry.tau[i - 1]
    rp = geometry.rho_plus[i]
    v = alpha * geometry.delta[i] / rp * (geometry.omega[i] + 1.0) * lift ** 2
    u = alpha * lift / rp
    g = geometry.g[i + 1]
    num = np.sum(g ** 4 * subgamma_moment_bound(v, u, 4))
    return float(num / variance_sum(geometry) ** 2)


def noise_sampler(i: int, geometry: EdgeGeometry, target: str):
    """Sampler ``f(rng, size)`` for the centred variable ``alpha_i``, ``beta_i`` or ``X_i``.

    Draws only the chi-squared entries the target depends on, so large
    marginal samples are cheap.
    """
    params = geometry.params
    n, m, alpha = params.n, params.m, params.alpha
    rp = geometry.rho_plus

    def centred(rng, dof_half, size, scale):
        # (alpha/2) chi^2(2k/alpha) - k = alpha * Gamma(k/alpha) - k
        return (alpha * rng.standard_gamma(dof_half / alpha, size) - dof_half) / scale

    if target == "alpha_i":
        return lambda rng, size: centred(rng, m - n + i, size, rp[i])
    if target == "beta_i":
        return lambda rng, size: centred(rng, i - 1, size, rp[i])
    if target == "x_i":
        lift, dl = 1.0 + geometry.tau[i - 1], geometry.delta[i]

        def x_i(rng, size):
            a_prev = centred(rng, m - n + i - 1, size, rp[i - 1])
            return lift * (dl * a_prev + centred(rng, i - 1, size, rp[i]))

        return x_i
    raise ValueError(f"unknown target {target!r}")


@dataclass(frozen=True)
class TailCheck:
    t: float
    threshold: float
    estimate: float
    bound: float
    std_err: float
    passed: bool


def tail_check(params: SubGammaParams, dist_sampler, t: float, n_draws: int,
               rng: np.random.Generator | None = None, draws=None) -> TailCheck:
    """Monte Carlo check of ``P(|X| > sqrt(2 v t) + u t) <= 2 exp(-t)``.

    ``dist_sampler(rng, size)`` must return centred draws.  Passes when the
    estimate is at most the bound plus three binomial standard errors.
    Pre-drawn samples may be passed as ``draws`` to reuse them across ``t``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if draws is None:
        rng = rng if rng is not None else np.random.default_rng()
        draws = dist_sampler(rng, n_draws)
    draws = np.asarray(draws)
    threshold = math.sqrt(2.0 * params.v * t) + params.u * t
    p_hat = float(np.mean(np.abs(draws) > threshold))
    bound = 2.0 * math.exp(-t)
    se = math.sqrt(p_hat * (1.0 - p_hat) / draws.size)
    return TailCheck(t, threshold, p_hat, bound, se, p_hat <= bound + 3.0 * se)


def linearization_gap(rec_trace: RecursionTrace, decomp_trace: DecompositionTrace) -> float:
    """``log|E_n| - (-sum L_i + sum A_0i - sum B*_3i)``, the part the linear model misses."""
    return float(rec_trace.log_abs_E - (-decomp_trace.sum_l + decomp_trace.a0_sum - decomp_trace.b3_star_sum))


def linearization_gap_batch(a_sq, b_sq, geometry: EdgeGeometry) -> np.ndarray:
    """:func:`linearization_gap` for a ``(k, n)`` stack; NaN where the recursion hit the guard."""
    a_sq, b_sq = np.atleast_2d(a_sq), np.atleast_2d(b_sq)
    rec = run_recursion_batch(a_sq, b_sq, geometry)
    sum_l, b3 = build_decomposition_batch(a_sq, b_sq, geometry)
    gap = rec.log_abs_E - (-sum_l + a0_sum(geometry) - b3)
    return np.where(rec.failed_at == 0, gap, np.nan)
