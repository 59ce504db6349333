"""Centering and scaling constants of the edge CLT, plus Marchenko-Pastur."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .ensemble import EnsembleParams
from .errors import InvalidParameterError

__all__ = [
    "CltConstants",
    "c_lambda",
    "clt_constants",
    "centering",
    "standardize",
    "mp_density",
    "mp_cdf",
]


def _check_lambda(lam):
    if not 0 < lam <= 1:
        raise InvalidParameterError(f"lambda must lie in (0, 1], got {lam}")


def c_lambda(lam: float) -> float:
    """Linear-in-n coefficient ``(1 - 1/lam) log(1 + sqrt(lam)) + log(sqrt(lam)) + lam^{-1/2}``."""
    _check_lambda(lam)
    root = math.sqrt(lam)
    return (1.0 - 1.0 / lam) * math.log1p(root) + math.log(root) + 1.0 / root


@dataclass(frozen=True)
class CltConstants:
    c_lambda: float
    coef_n13: float
    coef_sigma32: float
    coef_logn: float
    scale: float
    a0_constant: float
    b3_constant: float
    variance_constant: float

    def to_dict(self) -> dict:
        return asdict(self)


def clt_constants(params: EnsembleParams) -> CltConstants:
    lam, alpha, n = params.lam, params.alpha, params.n
    _check_lambda(lam)
    root = math.sqrt(lam)
    edge_term = 0.25 + 3.0 * root / (2.0 * (root + 1.0) ** 2)
    return CltConstants(
        c_lambda=c_lambda(lam),
        coef_n13=1.0 / (root * (1.0 + root)),
        coef_sigma32=2.0 / (3.0 * lam ** 0.75 * (1.0 + root) ** 2),
        coef_logn=(alpha - edge_term) / 6.0,
        scale=math.sqrt(alpha / 3.0 * math.log(n)),
        a0_constant=((root + 1.0) ** 2 + 6.0 * root) / (24.0 * (root + 1.0) ** 2),
        b3_constant=alpha / 6.0,
        variance_constant=alpha / 3.0,
    )


def deterministic_shift(params: EnsembleParams) -> float:
    """Three-term expansion of ``log|calD_n| - log|E_n|`` (without its O(1))."""
    k = clt_constants(params)
    n, s = params.n, params.sigma_n
    return k.c_lambda * n + k.coef_n13 * s * n ** (1.0 / 3.0) - k.coef_sigma32 * s ** 1.5


def centering(params: EnsembleParams) -> float:
    """Quantity subtracted from ``log|calD_n|`` to centre the statistic."""
    k = clt_constants(params)
    return deterministic_shift(params) - k.coef_logn * math.log(params.n)


def standardize(log_abs_calD, params: EnsembleParams):
    """``(log|calD_n| - centering) / sqrt((alpha/3) log n)``; arrays pass through."""
    k = clt_constants(params)
    z = (np.asarray(log_abs_calD, dtype=float) - centering(params)) / k.scale
    return float(z) if z.ndim == 0 else z


def mp_density(x, lam: float):
    """Marchenko-Pastur density with ratio ``lam``; zero off ``[d_-, d_+]``."""
    _check_lambda(lam)
    root = math.sqrt(lam)
    lo, hi = (1.0 - root) ** 2, (1.0 + root) ** 2
    x = np.asarray(x, dtype=float)
    inside = (x > lo) & (x < hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sqrt(np.clip((hi - x) * (x - lo), 0.0, None)) / (2.0 * math.pi * lam * x)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def _mp_theta_integrand(theta, lam):
    # x = c - r cos(theta) clears the square-root endpoint singularities
    root = math.sqrt(lam)
    c, r = 1.0 + lam, 2.0 * root
    s = math.sin(theta)
    return r * r * s * s / (2.0 * math.pi * lam * (c - r * math.cos(theta)))


def mp_cdf(x, lam: float):
    """Marchenko-Pastur CDF by adaptive quadrature (scalar or array ``x``)."""
    _check_lambda(lam)
    root = math.sqrt(lam)
    lo, hi = (1.0 - root) ** 2, (1.0 + root) ** 2
    c, r = 1.0 + lam, 2.0 * root

    def one(v):
        if v <= lo:
            return 0.0
        if v >= hi:
            v = hi
        theta = math.acos(min(1.0, max(-1.0, (c - v) / r)))
        val, _ = integrate.quad(_mp_theta_integrand, 0.0, theta, args=(lam,),
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        return min(1.0, max(0.0, val))

    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return one(float(arr))
    return np.array([one(float(v)) for v in arr.ravel()]).reshape(arr.shape)
