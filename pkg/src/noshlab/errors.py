"""Exception hierarchy.

``InputError`` covers malformed arguments and data (CLI exit code 2);
``NumericalError`` covers fits that cannot be computed (CLI exit code 3).
"""


class NoshLabError(Exception):
    """Base class for all package errors."""


class InputError(NoshLabError, ValueError):
    """Invalid argument, dataset or configuration."""


class SpecError(InputError):
    """An IvSpec that does not fit the estimator or the dataset."""


class UnsupportedConfigError(InputError):
    """A scenario configuration outside what a routine can handle."""


class NumericalError(NoshLabError, ArithmeticError):
    """A quantity that cannot be computed from the given data."""


class SingularityError(NumericalError):
    """Rank-deficient design, or singular instrument cross-moment matrix."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class IrrelevantInstrumentError(SingularityError):
    """Instrument with (numerically) zero covariance with the treatment."""


class UndefinedEstimandError(NumericalError):
    """An identity-based estimand whose denominator vanishes.

    ``combined`` carries any quantity that is still defined, e.g. the
    overall covariance ratio when a pairwise decomposition is not.
    """

    def __init__(self, message, combined=None):
        super().__init__(message)
        self.combined = combined
