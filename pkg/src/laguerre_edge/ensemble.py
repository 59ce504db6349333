"""Bidiagonal model of the Laguerre beta-ensemble.

``T = B B^T`` with ``B`` lower bidiagonal, diagonal ``a_1..a_n`` and
subdiagonal ``b_1..b_{n-1}``, where

    a_i^2 ~ (alpha/2) chi^2(2(m-n+i)/alpha),   b_i^2 ~ (alpha/2) chi^2(2i/alpha),

all independent.  Only the squares are stored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "EnsembleParams",
    "TridiagonalSample",
    "make_params",
    "replica_rng",
    "sample_chi_squared",
    "sample_bidiagonal",
    "sample_batch",
    "noise_free_sample",
    "build_tridiagonal",
    "dense_bbt",
]


@dataclass(frozen=True)
class EnsembleParams:
    """Dimensions, shape and edge shift of one ensemble.

    ``alpha = 2/beta``.  ``gamma = d_plus + sigma_n * n**(-2/3)`` is the
    scaled shift; the unscaled one applied to ``T`` is ``gamma * m``.
    """

    n: int
    m: int
    alpha: float
    lam: float
    sigma_n: float
    gamma: float
    d_plus: float
    d_minus: float

    def __post_init__(self):
        if self.n < 1 or self.m < self.n:
            raise InvalidParameterError(f"need 1 <= n <= m, got n={self.n}, m={self.m}")
        if not self.alpha > 0:
            raise InvalidParameterError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.lam <= 1:
            raise InvalidParameterError(f"lambda must lie in (0, 1], got {self.lam}")
        if abs(self.n / self.m - self.lam) > 1.0 / self.m:
            raise InvalidParameterError(
                f"n/m = {self.n / self.m} is not within 1/m of lambda = {self.lam}"
            )
        if not self.sigma_n > 0:
            raise InvalidParameterError(f"sigma_n must be positive, got {self.sigma_n}")

    @property
    def beta(self) -> float:
        return 2.0 / self.alpha

    @property
    def shift(self) -> float:
        """Unscaled shift ``gamma * m``."""
        return self.gamma * self.m

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "alpha": self.alpha,
            "lambda": self.lam,
            "sigma_n": self.sigma_n,
            "gamma": self.gamma,
            "d_plus": self.d_plus,
            "d_minus": self.d_minus,
        }


def make_params(n: int, lam: float, alpha: float, sigma_n: float, m: int | None = None) -> EnsembleParams:
    """Assemble :class:`EnsembleParams`; ``m`` defaults to ``round(n / lam)``."""
    if not 0 < lam <= 1:
        raise InvalidParameterError(f"lambda must lie in (0, 1], got {lam}")
    if m is None:
        m = max(int(n), int(round(n / lam)))
    root = math.sqrt(lam)
    d_plus = (1.0 + root) ** 2
    d_minus = (1.0 - root) ** 2
    gamma = d_plus + sigma_n * n ** (-2.0 / 3.0)
    return EnsembleParams(
        n=int(n), m=int(m), alpha=float(alpha), lam=float(lam), sigma_n=float(sigma_n),
        gamma=gamma, d_plus=d_plus, d_minus=d_minus,
    )


@dataclass(frozen=True)
class TridiagonalSample:
    """One draw of the bidiagonal model.

    Arrays are 0-based: ``a_sq[k]`` is ``a_{k+1}^2``, ``b_sq[k]`` is
    ``b_{k+1}^2``.  ``d`` and ``c`` are the centred, rescaled variables
    ``d_i = (a_i^2 - (m-n+i)) / sqrt(m-n+i)`` and ``c_i = (b_i^2 - i) / sqrt(i)``.
    """

    a_sq: np.ndarray
    b_sq: np.ndarray
    m: int
    seed: tuple = ()
    d: np.ndarray = field(init=False, repr=False)
    c: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.a_sq.shape[-1]
        if self.b_sq.shape[-1] != n - 1:
            raise InvalidParameterError("b_sq must have one fewer entry than a_sq")
        ka = (self.m - n) + np.arange(1, n + 1, dtype=float)
        kb = np.arange(1, n, dtype=float)
        object.__setattr__(self, "d", (self.a_sq - ka) / np.sqrt(ka))
        object.__setattr__(self, "c", (self.b_sq - kb) / np.sqrt(kb))

    @property
    def n(self) -> int:
        return self.a_sq.shape[-1]


def replica_rng(master_seed: int, replica_index: int, attempt: int = 0) -> np.random.Generator:
    """Independent stream for one replica (and one resampling attempt).

    The stream is a pure function of the three integers, so results do not
    depend on the order in which replicas are processed.
    """
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(replica_index), int(attempt)))
    return np.random.Generator(np.random.PCG64(seq))


def sample_chi_squared(dof, rng: np.random.Generator, size=None):
    """Chi-squared draws with possibly fractional ``dof``.

    Realised as ``2 * Gamma(dof/2)``; numpy's gamma generator is a rejection
    sampler valid for every shape > 0.  ``dof`` may be an array.
    """
    dof = np.asarray(dof, dtype=float)
    if np.any(~(dof > 0)):
        raise InvalidParameterError("chi-squared degrees of freedom must be positive")
    out = 2.0 * rng.standard_gamma(dof / 2.0, size=size)
    return float(out) if out.ndim == 0 else out


def _draw_squares(params: EnsembleParams, rng: np.random.Generator, size=None):
    n, m, alpha = params.n, params.m, params.alpha
    i = np.arange(1, n + 1, dtype=float)
    shape_a = (n,) if size is None else (size, n)
    shape_b = (n - 1,) if size is None else (size, n - 1)
    a_sq = 0.5 * alpha * sample_chi_squared(2.0 * (m - n + i) / alpha, rng, size=shape_a)
    if n > 1:
        b_sq = 0.5 * alpha * sample_chi_squared(2.0 * i[:-1] / alpha, rng, size=shape_b)
    else:
        b_sq = np.zeros(shape_b)
    return a_sq, b_sq


def sample_bidiagonal(params: EnsembleParams, master_seed: int, replica_index: int,
                      attempt: int = 0) -> TridiagonalSample:
    """Draw replica ``replica_index`` of the ensemble."""
    rng = replica_rng(master_seed, replica_index, attempt)
    a_sq, b_sq = _draw_squares(params, rng)
    return TridiagonalSample(a_sq, b_sq, params.m, seed=(int(master_seed), int(replica_index), int(attempt)))


def sample_batch(params: EnsembleParams, master_seed: int, replicas, attempt: int = 0):
    """Stack the draws of several replicas into ``(k, n)`` and ``(k, n-1)`` arrays.

    Row ``r`` is bit-identical to ``sample_bidiagonal(params, master_seed, replicas[r])``.
    """
    replicas = list(replicas)
    n = params.n
    a_sq = np.empty((len(replicas), n))
    b_sq = np.empty((len(replicas), n - 1))
    for row, idx in enumerate(replicas):
        rng = replica_rng(master_seed, idx, attempt)
        a_sq[row], b_sq[row] = _draw_squares(params, rng)
    return a_sq, b_sq


def noise_free_sample(params: EnsembleParams) -> TridiagonalSample:
    """The sample with every centred variable equal to zero."""
    n, m = params.n, params.m
    i = np.arange(1, n + 1, dtype=float)
    return TridiagonalSample((m - n) + i, i[:-1].copy(), m)


def build_tridiagonal(sample: TridiagonalSample):
    """Diagonal and off-diagonal of ``T = B B^T``."""
    diag = sample.a_sq.copy()
    diag[1:] += sample.b_sq
    offdiag = np.sqrt(sample.a_sq[:-1] * sample.b_sq)
    return diag, offdiag


def dense_bbt(sample: TridiagonalSample) -> np.ndarray:
    """Explicit ``B B^T`` (test helper; O(n^2) memory)."""
    n = sample.n
    B = np.diag(np.sqrt(sample.a_sq))
    if n > 1:
        B += np.diag(np.sqrt(sample.b_sq), k=-1)
    return B @ B.T
