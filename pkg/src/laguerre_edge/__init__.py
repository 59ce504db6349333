"""Edge log-determinant of Laguerre beta-ensembles.

Samples the bidiagonal model, evaluates ``log|det(T/m - gamma)|`` just
outside the upper spectral edge with a normalised ratio recursion, and
checks the resulting central limit behaviour numerically.
"""
from .ensemble import (
    EnsembleParams,
    TridiagonalSample,
    build_tridiagonal,
    make_params,
    noise_free_sample,
    sample_batch,
    sample_bidiagonal,
)
from .errors import (
    DegenerateDrawError,
    InvalidParameterError,
    LaguerreEdgeError,
    NearSingularError,
    OracleFailureError,
    ShiftInsideSpectrumError,
    SuspiciousParametersError,
)
from .geometry import EdgeGeometry, build_geometry, default_sigma, edge_params, rho_pair
from .logdet import eigen_oracle, run_recursion, run_recursion_batch
from .theory import CltConstants, c_lambda, centering, clt_constants, mp_cdf, standardize
from .diagnostics import a0_sum, build_decomposition, variance_sum
from .harness import SimulationConfig, SimulationBatch, ks_statistic, run_batch, summarize

__version__ = "0.1.0"
