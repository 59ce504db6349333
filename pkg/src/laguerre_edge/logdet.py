"""Stable evaluation of ``log|det(T - gamma*m)|`` near the upper edge.

The minors ``D_i`` overflow long before n = 1000, so the engine iterates the
normalised ratios ``R_i = 1 + E_i / E_{i-1}`` where
``E_i = D_i / prod_{j<=i} |rho_j^+|``.  With ``R_1 = alpha_1`` (i.e.
``D_0 = 1``, ``E_1 = alpha_1 - 1``) the exact update for ``i >= 2`` is

    R_i = alpha_i + beta_i + alpha_{i-1} beta_i + alpha_{i-1} delta_i
          + tau_{i-1} beta_i - (gamma_i - omega_i)
          + (alpha_{i-1} + tau_{i-1})(beta_i + delta_i) R_{i-1} / (1 - R_{i-1}),

which is the raw ratio recursion with the O(1) deterministic terms cancelled
analytically.  ``log|E_n| = log|1 - alpha_1| + sum_{i>=2} log|1 - R_i|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigvalsh_tridiagonal

from .ensemble import EnsembleParams, TridiagonalSample, build_tridiagonal
from .errors import DegenerateDrawError, NearSingularError, OracleFailureError
from .geometry import EdgeGeometry

__all__ = [
    "GUARD",
    "SOFT_GUARD",
    "ORACLE_MAX_N",
    "RecursionTrace",
    "BatchRecursion",
    "noise_variables",
    "r2_initial",
    "run_recursion",
    "run_recursion_batch",
    "tridiagonal_logabsdet",
    "eigen_oracle",
    "eigenvalues_scaled",
    "largest_eigenvalue_scaled",
]

GUARD = 1e-13
SOFT_GUARD = 1e-8
ORACLE_MAX_N = 5000


@dataclass(frozen=True, eq=False)
class RecursionTrace:
    """Output of :func:`run_recursion` for one sample.

    ``r[i]`` holds ``R_i`` for ``2 <= i <= n`` (NaN at 0 and 1).
    ``guard_events`` counts steps where ``|1 - R_{i-1}|`` dropped below
    ``SOFT_GUARD`` without reaching the hard threshold.
    """

    r: np.ndarray
    log_abs_E1: float
    log_abs_E2: float
    log_abs_E: float
    sign_E: int
    log_abs_D: float
    log_abs_calD: float
    max_abs_r: float
    guard_events: int


@dataclass(frozen=True, eq=False)
class BatchRecursion:
    """Vectorised recursion results for ``k`` replicas.

    ``failed_at[r]`` is 0 for a clean replica, 1 for a degenerate first
    step (``|1 - alpha_1|`` below the guard) and ``i`` when ``|1 - R_{i-1}|``
    fell below the guard while computing ``R_i``.  Entries of failed
    replicas are meaningless.
    """

    log_abs_E: np.ndarray
    log_abs_E2: np.ndarray
    sign_E: np.ndarray
    log_abs_D: np.ndarray
    log_abs_calD: np.ndarray
    max_abs_r: np.ndarray
    guard_events: np.ndarray
    failed_at: np.ndarray
    r: np.ndarray | None = None


def noise_variables(a_sq, b_sq, geometry: EdgeGeometry):
    """``alpha_i`` (1..n) and ``beta_i`` (2..n) as 1-based, NaN-padded arrays.

    Accepts a single sample (1-d) or a stack of samples (2-d); the trailing
    axis is the index.
    """
    a_sq = np.asarray(a_sq, dtype=float)
    b_sq = np.asarray(b_sq, dtype=float)
    n, m = geometry.n, geometry.m
    i = np.arange(1, n + 1, dtype=float)
    lead = a_sq.shape[:-1]
    av = np.full(lead + (n + 1,), np.nan)
    bv = np.full(lead + (n + 1,), np.nan)
    av[..., 1:] = (a_sq - (m - n + i)) / geometry.rho_plus[1:]
    if n >= 2:
        bv[..., 2:] = (b_sq - i[:-1]) / geometry.rho_plus[2:]
    return av, bv


def _check_dims(sample_n, sample_m, geometry):
    if sample_n != geometry.n or sample_m != geometry.m:
        raise ValueError(
            f"sample (n={sample_n}, m={sample_m}) does not match geometry (n={geometry.n}, m={geometry.m})"
        )


def run_recursion_batch(a_sq, b_sq, geometry: EdgeGeometry, keep_r: bool = False) -> BatchRecursion:
    """Run the R-recursion for a ``(k, n)`` stack of samples at once.

    Each replica's arithmetic is independent of the others, so row ``r`` of
    the result does not depend on which other rows are in the batch.
    """
    a_sq = np.atleast_2d(np.asarray(a_sq, dtype=float))
    b_sq = np.atleast_2d(np.asarray(b_sq, dtype=float)).reshape(a_sq.shape[0], -1)
    k, n = a_sq.shape
    if n != geometry.n:
        raise ValueError(f"samples have n={n}, geometry has n={geometry.n}")
    av, bv = noise_variables(a_sq, b_sq, geometry)
    # index-major so each step reads contiguous rows
    av = np.ascontiguousarray(av.T)
    bv = np.ascontiguousarray(bv.T)
    tau, delta, gmw = geometry.tau.tolist(), geometry.delta.tolist(), geometry.gamma_minus_omega.tolist()

    failed = np.zeros(k, dtype=np.int64)
    soft = np.zeros(k, dtype=np.int64)
    r_store = np.full((n + 1, k), np.nan) if keep_r else None

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        one_minus = 1.0 - av[1]
        bad = np.abs(one_minus) < GUARD
        failed[bad] = 1
        log_e1 = np.log(np.abs(one_minus))
        log_e = log_e1.copy()
        log_e2 = np.full(k, np.nan)
        sign = -np.sign(one_minus)
        r_prev = av[1].copy()
        max_r = np.zeros(k)
        for i in range(2, n + 1):
            a_prev, a_cur, b_cur = av[i - 1], av[i], bv[i]
            denom = 1.0 - r_prev
            small = np.abs(denom)
            hit = (small < GUARD) & (failed == 0)
            if hit.any():
                failed[hit] = i
            soft += (small < SOFT_GUARD) & (small >= GUARD)
            base = (a_cur + b_cur + a_prev * b_cur + a_prev * delta[i] + tau[i - 1] * b_cur) - gmw[i]
            r_cur = base + (a_prev + tau[i - 1]) * (b_cur + delta[i]) * (r_prev / denom)
            one_minus = 1.0 - r_cur
            log_e += np.log(np.abs(one_minus))
            sign = -sign * np.sign(one_minus)
            np.maximum(max_r, np.abs(r_cur), out=max_r)
            if i == 2:
                log_e2 = log_e.copy()
            if keep_r:
                r_store[i] = r_cur
            r_prev = r_cur
        if n == 1:
            log_e2 = log_e.copy()
    log_d = log_e + geometry.log_rho_plus_sum
    log_cal = log_d - n * math.log(geometry.m)
    return BatchRecursion(
        log_abs_E=log_e, log_abs_E2=log_e2, sign_E=np.nan_to_num(sign).astype(int), log_abs_D=log_d,
        log_abs_calD=log_cal, max_abs_r=max_r, guard_events=soft, failed_at=failed,
        r=None if r_store is None else r_store.T.copy(),
    )


def run_recursion(sample: TridiagonalSample, geometry: EdgeGeometry) -> RecursionTrace:
    """Full trace of the normalised recursion for one sample.

    Raises :class:`DegenerateDrawError` if ``|1 - alpha_1|`` is below the
    guard and :class:`NearSingularError` if any ``|1 - R_{i-1}|`` is.
    """
    _check_dims(sample.n, sample.m, geometry)
    out = run_recursion_batch(sample.a_sq[None, :], sample.b_sq[None, :], geometry, keep_r=True)
    where = int(out.failed_at[0])
    if where == 1:
        raise DegenerateDrawError("|1 - alpha_1| below guard: a_1^2 is (numerically) gamma*m")
    if where:
        raise NearSingularError(where, abs(1.0 - out.r[0][where - 1]))
    log_e1 = float(np.log(abs(1.0 - noise_variables(sample.a_sq, sample.b_sq, geometry)[0][1])))
    return RecursionTrace(
        r=out.r[0],
        log_abs_E1=log_e1,
        log_abs_E2=float(out.log_abs_E2[0]),
        log_abs_E=float(out.log_abs_E[0]),
        sign_E=int(out.sign_E[0]),
        log_abs_D=float(out.log_abs_D[0]),
        log_abs_calD=float(out.log_abs_calD[0]),
        max_abs_r=float(out.max_abs_r[0]),
        guard_events=int(out.guard_events[0]),
    )


def r2_initial(sample: TridiagonalSample, geometry: EdgeGeometry) -> float:
    """Closed form for ``R_2`` in terms of the first two noise variables.

        R_2 = (omega_2 - gamma_2) + alpha_2
              + (1 + (alpha_1 + tau_1)/(1 - alpha_1)) beta_2
              + alpha_1 (1 + tau_1)/(1 - alpha_1) * delta_2
    """
    _check_dims(sample.n, sample.m, geometry)
    if geometry.n < 2:
        raise ValueError("R_2 needs n >= 2")
    av, bv = noise_variables(sample.a_sq, sample.b_sq, geometry)
    a1, a2, b2 = av[1], av[2], bv[2]
    if abs(1.0 - a1) < GUARD:
        raise DegenerateDrawError("|1 - alpha_1| below guard: resample")
    tau1, delta2 = geometry.tau[1], geometry.delta[2]
    ratio = (a1 + tau1) / (1.0 - a1)
    return float(
        -geometry.gamma_minus_omega[2] + a2 + (1.0 + ratio) * b2 + a1 * (1.0 + tau1) / (1.0 - a1) * delta2
    )


def tridiagonal_logabsdet(diag, offdiag, shift: float = 0.0) -> float:
    """``sum_j log|mu_j - shift|`` over the eigenvalues of a Jacobi matrix.

    Eigenvalues come from LAPACK's bisection/Sturm-count driver (``stebz``).
    """
    diag = np.asarray(diag, dtype=float)
    offdiag = np.asarray(offdiag, dtype=float)
    if diag.size == 1:
        return float(np.log(abs(diag[0] - shift)))
    try:
        mu = eigvalsh_tridiagonal(diag, offdiag, lapack_driver="stebz")
    except (LinAlgError, ValueError) as exc:
        raise OracleFailureError(str(exc)) from exc
    if not np.all(np.isfinite(mu)):
        raise OracleFailureError("eigensolver returned non-finite eigenvalues")
    return float(np.sum(np.log(np.abs(mu - shift))))


def eigen_oracle(sample: TridiagonalSample, params: EnsembleParams) -> float:
    """Independent ``log|det(T - gamma m)|`` from the full spectrum of ``T``."""
    if sample.n > ORACLE_MAX_N:
        raise OracleFailureError(f"eigen oracle limited to n <= {ORACLE_MAX_N}")
    diag, off = build_tridiagonal(sample)
    return tridiagonal_logabsdet(diag, off, params.shift)


def eigenvalues_scaled(sample: TridiagonalSample, params: EnsembleParams) -> np.ndarray:
    """Ascending eigenvalues of ``T / m``."""
    if sample.n > ORACLE_MAX_N:
        raise OracleFailureError(f"eigensolver limited to n <= {ORACLE_MAX_N}")
    diag, off = build_tridiagonal(sample)
    if sample.n == 1:
        return diag / params.m
    try:
        mu = eigvalsh_tridiagonal(diag / params.m, off / params.m, lapack_driver="stebz")
    except (LinAlgError, ValueError) as exc:
        raise OracleFailureError(str(exc)) from exc
    return np.sort(mu)


def largest_eigenvalue_scaled(sample: TridiagonalSample, params: EnsembleParams) -> float:
    """Top eigenvalue of ``T / m`` by bisection on that index alone."""
    diag, off = build_tridiagonal(sample)
    if sample.n == 1:
        return float(diag[0] / params.m)
    try:
        mu = eigvalsh_tridiagonal(diag / params.m, off / params.m, select="i",
                                  select_range=(sample.n - 1, sample.n - 1), lapack_driver="stebz")
    except (LinAlgError, ValueError) as exc:
        raise OracleFailureError(str(exc)) from exc
    return float(mu[0])
