"""Exception types raised across the package."""


class ReservingError(Exception):
    """Base class for every error raised by hglmreserve."""


class TriangleError(ReservingError, ValueError):
    """Malformed triangle input."""


class ParseError(TriangleError):
    pass


class DuplicateCell(TriangleError):
    pass


class IncompleteTriangle(TriangleError):
    pass


class FutureCellPresent(TriangleError):
    pass


class KindMismatch(TriangleError):
    pass


class DegenerateTriangle(TriangleError):
    pass


class DomainError(ReservingError, ValueError):
    """Argument outside the support of a Tweedie family or a probability range."""


class FitError(ReservingError):
    """A model could not be fitted."""


class SingularDesign(FitError):
    pass


class NoConvergence(FitError):
    """Iteration cap reached. The unconverged fit is kept on ``.fit``."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class StaleFit(ReservingError):
    """A prediction was requested from a fit that did not converge."""


class BaseFitError(FitError):
    pass


class TooManyFailures(ReservingError):
    """Bootstrap redraw budget exhausted. The partial result is kept on ``.result``."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
