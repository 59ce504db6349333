"""Exception types raised by the library."""


class LaguerreEdgeError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(LaguerreEdgeError, ValueError):
    pass


class ShiftInsideSpectrumError(LaguerreEdgeError):
    """The shift does not clear the deterministic recursion's spectrum."""


class DegenerateDrawError(LaguerreEdgeError):
    """A measure-zero event (e.g. a_1^2 == gamma*m) was hit; resample."""


class NearSingularError(LaguerreEdgeError):
    """|1 - R_{i-1}| fell below the guard threshold at step ``index``."""

    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"near-singular minor at i={index}: |1 - R| = {value:.3e}")


class OracleFailureError(LaguerreEdgeError):
    pass


class SuspiciousParametersError(LaguerreEdgeError):
    """Too many replicas needed resampling."""
