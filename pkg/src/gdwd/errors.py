"""Exception hierarchy shared by the package."""


class DWDError(Exception):
    """Base class for all errors raised by gdwd."""


class InvalidInputError(DWDError, ValueError):
    """Problem data or arguments violate a documented precondition."""


class ParseError(InvalidInputError):
    """Malformed LIBSVM input.  ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class NumericalError(DWDError, ArithmeticError):
    """A factorization, eigen-solve or Newton iteration failed."""


class BreakdownError(NumericalError):
    """Krylov recurrence hit a (near) zero denominator."""
