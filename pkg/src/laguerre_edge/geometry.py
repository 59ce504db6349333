"""Deterministic per-index tables of the normalised determinant recursion.

The deterministic analogue of the minor recursion has characteristic roots
``rho_i^{+-}`` solving ``r^2 - A_i r + B_i = 0`` (up to sign) with

    A_i = gamma*m - (m - n + 2i - 1),   B_i = (m - n + i - 1)(i - 1).

Everything here is stored 1-based: ``geometry.rho_plus[i]`` is
``|rho_i^+|`` and entries at indices where a quantity is undefined are NaN.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .ensemble import EnsembleParams, make_params
from .errors import InvalidParameterError, ShiftInsideSpectrumError

__all__ = [
    "EdgeGeometry",
    "default_sigma",
    "edge_params",
    "rho_pair",
    "rho_pair_mp",
    "build_geometry",
    "omega_asymptote",
    "omega_regime",
    "geometry_csv",
]

# Switch to the factored discriminant once 4B/A^2 exceeds this.
_FACTOR_THRESHOLD = 0.99


def default_sigma(n: int) -> float:
    return math.log(n) ** 1.5


def edge_params(n: int, lam: float, alpha: float, sigma_override: float | None = None) -> EnsembleParams:
    """Parameters for an ``n``-dimensional ensemble shifted just past the edge.

    ``m = round(n / lam)`` and, unless overridden, ``sigma_n = (log n)^{3/2}``.
    """
    if n < 5:
        raise InvalidParameterError(f"n must be at least 5, got {n}")
    if not 0 < lam <= 1:
        raise InvalidParameterError(f"lambda must lie in (0, 1], got {lam}")
    if not alpha > 0:
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    sigma = default_sigma(n) if sigma_override is None else float(sigma_override)
    return make_params(n, lam, alpha, sigma)


def _coefficients(i, params: EnsembleParams):
    n, m = params.n, params.m
    a = params.gamma * m - (m - n + 2.0 * i - 1.0)
    b = (m - n + i - 1.0) * (i - 1.0)
    return a, b


def _sqrt_discriminant(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    direct = a * a - 4.0 * b
    two_root_b = 2.0 * np.sqrt(b)
    factored = (a - two_root_b) * (a + two_root_b)
    disc = np.where(4.0 * b > _FACTOR_THRESHOLD * a * a, factored, direct)
    if np.any(disc < 0) or np.any(a <= 0):
        raise ShiftInsideSpectrumError(
            "A_i^2 - 4 B_i < 0: the shift gamma*m lies inside the deterministic spectrum"
        )
    return np.sqrt(disc)


def rho_pair(i: int, params: EnsembleParams):
    """``(|rho_i^+|, |rho_i^-|)`` for ``1 <= i <= n``.

    The small root comes from the root product ``B_i / |rho_i^+|``, never
    from the subtractive formula.
    """
    if not 1 <= i <= params.n:
        raise InvalidParameterError(f"index {i} outside 1..{params.n}")
    a, b = _coefficients(float(i), params)
    s = float(_sqrt_discriminant(a, b))
    rp = 0.5 * (a + s)
    return rp, b / rp


def rho_pair_mp(i: int, params: EnsembleParams, dps: int = 50):
    """Extended-precision ``rho_pair`` via mpmath; used as a test oracle.

    ``gamma`` is rebuilt from ``lam``, ``sigma_n`` and ``n`` at ``dps`` digits
    rather than taken from the rounded double.
    """
    import mpmath

    with mpmath.workdps(dps):
        n, m = mpmath.mpf(params.n), mpmath.mpf(params.m)
        lam = mpmath.mpf(params.lam)
        gamma = (1 + mpmath.sqrt(lam)) ** 2 + mpmath.mpf(params.sigma_n) * n ** (mpmath.mpf(-2) / 3)
        a = gamma * m - (m - n + 2 * i - 1)
        b = (m - n + i - 1) * (i - 1)
        s = mpmath.sqrt(a * a - 4 * b)
        rp = (a + s) / 2
        rm = (a - s) / 2
        return rp, rm


@dataclass(frozen=True, eq=False)
class EdgeGeometry:
    """Per-index tables for one :class:`EnsembleParams` (1-based, NaN-padded).

    ``rho_plus``, ``rho_minus``, ``tau``, ``delta`` are defined on 1..n;
    ``omega``, ``gamma_ratio`` and ``gamma_minus_omega`` on 2..n;
    ``g`` on 3..n+1.  ``rho_plus_step[i] = |rho_{i-1}^+| - |rho_i^+|`` on 2..n.
    """

    params: EnsembleParams
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    tau: np.ndarray
    delta: np.ndarray
    omega: np.ndarray
    gamma_ratio: np.ndarray
    gamma_minus_omega: np.ndarray
    rho_plus_step: np.ndarray
    g: np.ndarray

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def log_rho_plus_sum(self) -> float:
        """``sum_{i=1}^n log|rho_i^+|``, the gap between log|D_n| and log|E_n|."""
        return float(np.sum(np.log(self.rho_plus[1:])))

    def expected_x_sq(self) -> np.ndarray:
        """Closed-form ``E X_i^2`` on 3..n (NaN elsewhere), linear in alpha."""
        out = np.full(self.n + 1, np.nan)
        i = np.arange(3, self.n + 1)
        out[3:] = (
            self.params.alpha * self.delta[i] * (1.0 + self.tau[i - 1]) ** 2
            * (self.omega[i] / self.rho_plus[i - 1] + 1.0 / self.rho_plus[i])
        )
        return out


def build_geometry(params: EnsembleParams) -> EdgeGeometry:
    n, m = params.n, params.m
    i = np.arange(1, n + 1, dtype=float)
    a, b = _coefficients(i, params)
    root = _sqrt_discriminant(a, b)
    rp_core = 0.5 * (a + root)

    def padded(values, start=1, length=n + 1):
        out = np.full(length, np.nan)
        out[start:start + len(values)] = values
        return out

    rho_plus = padded(rp_core)
    rho_minus = padded(b / rp_core)
    sqrt_u = padded(root)
    idx = np.arange(n + 1, dtype=float)
    tau = (m - n + idx) / rho_plus
    delta = (idx - 1.0) / rho_plus

    omega = np.full(n + 1, np.nan)
    gamma_ratio = np.full(n + 1, np.nan)
    gmw = np.full(n + 1, np.nan)
    step = np.full(n + 1, np.nan)
    if n >= 2:
        omega[2:] = rho_minus[2:] / rho_plus[1:-1]
        gamma_ratio[2:] = rho_minus[2:] / rho_plus[2:]
        # U_{i-1} - U_i = 4(gamma*m - 1) exactly, so the step has no cancellation.
        step[2:] = 1.0 + 2.0 * (params.gamma * m - 1.0) / (sqrt_u[1:-1] + sqrt_u[2:])
        gmw[2:] = rho_minus[2:] * step[2:] / (rho_plus[2:] * rho_plus[1:-1])

    g = np.full(n + 2, np.nan)
    g[n + 1] = 1.0
    acc = 1.0
    om = omega.tolist()
    for k in range(n, 2, -1):
        acc = 1.0 + om[k] * acc
        g[k] = acc

    return EdgeGeometry(
        params=params, rho_plus=rho_plus, rho_minus=rho_minus, tau=tau, delta=delta,
        omega=omega, gamma_ratio=gamma_ratio, gamma_minus_omega=gmw, rho_plus_step=step, g=g,
    )


def omega_regime(i: int, params: EnsembleParams) -> str:
    """Which asymptotic regime of ``n - i`` applies: 'i', 'ii', 'iii' or 'iv'.

    Cut-offs: ``r = (n-i)/(n^{1/3} sigma_n)``; 'i' for r < 0.05, 'iii' for
    r > 20, 'iv' once ``(n-i)/n >= 0.05``, 'ii' otherwise.
    """
    n = params.n
    if (n - i) / n >= 0.05:
        return "iv"
    r = (n - i) / (n ** (1.0 / 3.0) * params.sigma_n)
    if r < 0.05:
        return "i"
    if r > 20.0:
        return "iii"
    return "ii"


def omega_asymptote(i: int, params: EnsembleParams, regime: str | None = None) -> float:
    """Leading-order prediction for ``omega_i`` (diagnostics only)."""
    n, lam, sigma = params.n, params.lam, params.sigma_n
    regime = regime or omega_regime(i, params)
    root = math.sqrt(lam)
    edge_scale = n ** (-1.0 / 3.0) * math.sqrt(sigma)
    x = (n - i) / n
    if regime == "i":
        return 1.0 - 2.0 * lam ** -0.25 * edge_scale
    if regime == "ii":
        r = (n - i) / (n ** (1.0 / 3.0) * sigma)
        return 1.0 - 2.0 * math.sqrt(1.0 / root + (root + 1.0) ** 2 * r) * edge_scale
    if regime == "iii":
        return 1.0 - 2.0 * (1.0 + root) * math.sqrt(x)
    if regime == "iv":
        inv = 1.0 / root
        num = inv + x - (inv + 1.0) * math.sqrt(x)
        den = inv + x + (inv + 1.0) * math.sqrt(x)
        return num / den
    raise InvalidParameterError(f"unknown regime {regime!r}")


_CSV_COLUMNS = ("i", "rho_plus", "rho_minus", "omega", "gamma_ratio", "tau", "delta", "g")


def _fmt(x: float) -> str:
    return "" if not np.isfinite(x) else format(float(x), ".17g")


def geometry_csv(geometry: EdgeGeometry, stream=None) -> str | None:
    """Write the per-index table as CSV (empty cells where undefined)."""
    own = stream is None
    if own:
        stream = io.StringIO()
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for i in range(1, geometry.n + 1):
        writer.writerow([
            i,
            _fmt(geometry.rho_plus[i]),
            _fmt(geometry.rho_minus[i]),
            _fmt(geometry.omega[i]),
            _fmt(geometry.gamma_ratio[i]),
            _fmt(geometry.tau[i]),
            _fmt(geometry.delta[i]),
            _fmt(geometry.g[i]),
        ])
    return stream.getvalue() if own else None
