"""Exception and warning types shared across the package."""


class SubspecError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(SubspecError):
    """A profile parameter is outside its validity range."""


class NonPositiveSampleError(SubspecError):
    """A tabulated profile contains a sample that is not strictly positive."""


class NegativeArgumentError(SubspecError):
    """An evaluation point x < 0 was passed to a half-line quantity."""


class MissingDecayError(SubspecError):
    """The operation needs decay metadata but the model carries none."""


class ZeroGammaError(SubspecError):
    """The Robin parameter gamma must be nonzero."""


class ComplexGammaError(SubspecError):
    """Eigen-analysis is restricted to real gamma."""


class NonHermitianError(SubspecError):
    """A symmetric eigensolve was requested for a non-hermitian matrix."""


class NonSmoothModelError(SubspecError):
    """The operation needs second-derivative data the model does not have."""


class NonPositiveFError(SubspecError):
    """The combination a*phi + b*psi is not strictly positive on [0, x]."""


class NoDecayDetectedError(SubspecError):
    """phi did not fall below the requested threshold within the search window."""


class GridMismatchError(SubspecError):
    """Two kernel matrices were built on different quadrature grids."""


class InsufficientDataError(SubspecError):
    """Not enough converged eigenvalues for the requested fit."""


class NonPositiveMuError(SubspecError):
    """A significantly negative eigenvalue appeared for a positive kernel kind."""


class MismatchedLengthsError(SubspecError):
    """Two spectral results with different lengths cannot be compared."""


class MissingNuError(SubspecError):
    """The analytic trace bound needs a dominating nu but none was supplied."""


class NotCompactError(SubspecError):
    """Dual-route validation is only meaningful when the spectrum is discrete."""


class ConfigError(SubspecError):
    """The CLI configuration file could not be parsed or validated."""


class SlowDecayWarning(UserWarning):
    """Truncation search succeeded only at a very large X (sub-exponential phi)."""
