"""Exception and warning types shared across the package."""


class ElError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(ElError, ValueError):
    """An argument fails validation (dimension, range, or type)."""


class InvalidDimensionError(InvalidArgumentError):
    """A dimension parameter is zero, negative, or inconsistent."""


class DataFormatError(ElError, ValueError):
    """A data file cannot be parsed.

    Attributes
    ----------
    path : str
        File that failed to parse.
    line_number : int or None
        1-based line where the problem was found, if known.
    """

    def __init__(self, message, path=None, line_number=None):
        super().__init__(message)
        self.path = path
        self.line_number = line_number


class DomainViolationError(ElError):
    """The requested parameter value lies outside the likelihood domain.

    Carries the separating certificate produced by the hull test so the
    caller can see why zero is not interior to the hull of the
    estimating-function values.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class NonConvergenceError(ElError):
    """An iterative solver exhausted its budget without converging.

    Attributes
    ----------
    diagnostics : dict
        Last iterate, residual norm, and iteration count.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class RankDeficiencyError(ElError):
    """A matrix required to be full rank is numerically singular."""


class UnsupportedConfigurationError(ElError):
    """The requested combination of options is not defined (e.g. a
    second-order extended likelihood for an over-determined model)."""


class SurjectivityError(ElError):
    """The inverse of the expansion mapping could not be located.

    Should not occur for expansion factors that are >= 1; reported rather
    than patched when it does.
    """


class BelClampWarning(UserWarning):
    """The Bartlett factor 1 - b/n was non-positive and was clamped to 0."""
