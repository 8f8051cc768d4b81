"""Exception types raised across the package."""


class LevyError(Exception):
    """Base class for all package errors."""


class DomainError(LevyError, ValueError):
    """A parameter lies outside the domain of the operation."""


class InvalidKernelError(LevyError, ValueError):
    """The jump kernel violates positivity, ellipticity or cancellation."""


class DataError(LevyError, ValueError):
    """Input samples are non-finite or otherwise unusable."""


class GridMismatchError(LevyError, ValueError):
    """Two objects live on different grids."""


class AccuracyError(LevyError, RuntimeError):
    """A quadrature could not meet its error budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(LevyError, RuntimeError):
    """The frozen-kernel iteration stopped contracting.

    The partial :class:`~levyschauder.resolvent.PicardTrace` is attached as
    ``trace`` so callers can inspect the residual history.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
