"""Exception hierarchy shared by all modules."""


class OneBitMimoError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(OneBitMimoError, ValueError):
    """Input has the wrong shape, a non-finite entry, or an out-of-range value."""


class DegenerateCovarianceError(OneBitMimoError, ValueError):
    """A covariance has a zero or negative diagonal entry."""


class InvalidCovarianceError(OneBitMimoError, ValueError):
    """Normalized covariance entries fall outside [-1, 1] beyond round-off."""


class NumericalInconsistencyError(OneBitMimoError, ArithmeticError):
    """A quantity that must lie in a known range does not."""


class ConstructionError(OneBitMimoError, RuntimeError):
    """A randomized construction did not succeed within its retry budget."""


class ConfigError(OneBitMimoError, ValueError):
    """Experiment configuration is invalid."""
