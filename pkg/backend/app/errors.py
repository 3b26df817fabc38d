"""Exception hierarchy shared by every service module.

All errors derive from RSPError (a ValueError) so the CLI and the API can
map them to a usage failure without knowing the concrete class.
"""

from typing import Optional


class RSPError(ValueError):
    """Base class for every validation or computation failure of the toolkit"""


# Network construction

class NetworkError(RSPError):
    pass


class NegativeWeight(NetworkError):
    def __init__(self, row: int, column: int, value: float):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"weight w[{row}][{column}] = {value!r} is negative")


class ColumnNotNormalized(NetworkError):
    def __init__(self, column: int, observed: float):
        self.column = column
        self.observed = observed
        super().__init__(f"column {column} sums to {observed!r}, expected 1")


class DimensionMismatch(NetworkError):
    pass


class AlphaOutOfRange(NetworkError):
    def __init__(self, alpha: float):
        super().__init__(f"alpha must lie in (0, 1], got {alpha!r}")


class POutOfRange(NetworkError):
    def __init__(self, p: float):
        super().__init__(f"p must lie in (0, 1), got {p!r}")


class NTooSmall(NetworkError):
    def __init__(self, n: int, minimum: int):
        super().__init__(f"network size {n} is below the minimum {minimum}")


# Spectral analysis

class SpectralError(RSPError):
    pass


class NotIrreducible(SpectralError):
    def __init__(self):
        super().__init__("weighted adjacency matrix is reducible; spectral analysis requires strong connectivity")


class NotDiagonalizable(SpectralError):
    pass


class BiorthogonalizationFailed(SpectralError):
    pass


class PerronSignError(SpectralError):
    pass


# Regimes

class RegimeError(RSPError):
    pass


class GammaOutOfRange(RegimeError):
    def __init__(self, gamma: float):
        super().__init__(f"gamma must lie in (1/2, 1], got {gamma!r}")


class UncoveredRegime(RegimeError):
    def __init__(self, re_lambda_star: float, threshold: float):
        super().__init__(
            f"gamma=1 with Re(lambda*)={re_lambda_star:.12g} above 1-(2c)^-1={threshold:.12g} "
            "is not covered by the asymptotic results"
        )


class RegimeBoundary(RegimeError):
    pass


# Dynamics

class SimulationError(RSPError):
    pass


class HorizonZero(SimulationError):
    def __init__(self, horizon: int):
        super().__init__(f"horizon must be >= 1, got {horizon}")


class TooLarge(SimulationError):
    def __init__(self, n_vertices: int, n_max: int, limit: int):
        super().__init__(f"enumeration over N*n_max = {n_vertices * n_max} binary draws exceeds {limit}")


class InvalidState(SimulationError):
    pass


class ScheduleError(SimulationError):
    pass


# Asymptotics

class AsymptoticsError(RSPError):
    pass


class UnsupportedExample(AsymptoticsError):
    def __init__(self, kind: str):
        super().__init__(f"no closed form available for network family {kind!r}")


class DomainError(AsymptoticsError):
    pass


class SameVertex(AsymptoticsError):
    def __init__(self, j: int):
        super().__init__(f"pairwise synchronization variance needs two distinct vertices, got j=k={j}")


class RankMismatch(AsymptoticsError):
    pass


# Inference

class InferenceError(RSPError):
    pass


class NotSymmetric(InferenceError):
    def __init__(self, asymmetry: float):
        super().__init__(f"covariance matrix is not symmetric (max |S - S^T| = {asymmetry:.3g})")


class NegativeEigenvalue(InferenceError):
    def __init__(self, eigenvalue: float):
        super().__init__(f"covariance matrix has a negative eigenvalue {eigenvalue:.3g}")


class RankZero(InferenceError):
    def __init__(self):
        super().__init__("covariance matrix has rank zero: no testable directions remain")


class DegenerateState(InferenceError):
    def __init__(self, z_tilde: float):
        super().__init__(f"z_tilde={z_tilde!r} is degenerate (must lie strictly inside (0, 1))")


class ProbOutOfRange(InferenceError):
    def __init__(self, prob: float):
        super().__init__(f"probability must lie in (0, 1), got {prob!r}")


# Harness

class HarnessError(RSPError):
    pass


class ZeroVariancePair(HarnessError):
    def __init__(self, j: int, k: int, value: Optional[float] = None):
        super().__init__(f"synchronization variance of pair ({j}, {k}) is not positive ({value!r})")


class HorizonOrder(HarnessError):
    pass


class MissingCheckpoint(HarnessError):
    def __init__(self, n: int, available):
        super().__init__(f"ensemble has no recorded state at n={n}; recorded: {sorted(available)}")
