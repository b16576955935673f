"""Exception types shared across the package.

The CLI and the HTTP service map these onto exit codes / status codes:
configuration problems, numerical failures, and nonconvergence are kept
as separate branches of the hierarchy so callers can tell them apart.
"""


class CrossoverDesignError(Exception):
    """Base class for all package errors."""


class ConfigError(CrossoverDesignError):
    """A run configuration is structurally or semantically invalid."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class UnknownTreatmentLabel(ConfigError):
    """A sequence string names a treatment outside the allowed alphabet."""

    def __init__(self, message: str, path: str = "sequence"):
        super().__init__(path, message)


class DimensionMismatch(CrossoverDesignError):
    """Array or sequence dimensions are inconsistent with the problem."""


class NumericalError(CrossoverDesignError):
    """Base class for failures of the numerical machinery."""


class NonFiniteInput(NumericalError):
    """A numeric input is NaN or infinite."""


class DomainError(NumericalError):
    """A mean value lies outside the response family's domain."""


class NotPositiveDefinite(NumericalError):
    """A correlation or covariance matrix is not positive definite."""


class MissingPairCorrelation(NumericalError):
    """A sequence-dependent structure lacks an entry for a treatment pair."""


class SingularWorkingCovariance(NumericalError):
    """The working covariance of a sequence cannot be inverted."""


class SingularInformation(NumericalError):
    """The information matrix is numerically singular at this design."""


class ConvergenceError(CrossoverDesignError):
    """Base class for iterative procedures that failed to converge."""


class DidNotConverge(ConvergenceError):
    """The design optimizer failed its stationarity checks on every restart."""


class FitDidNotConverge(ConvergenceError):
    """GEE fitting produced non-finite estimates or a singular scoring step."""


class RankDeficientDesign(CrossoverDesignError):
    """The stacked design matrix of a dataset lacks full column rank."""
