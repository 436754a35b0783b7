"""Exception hierarchy shared by the solver modules and the CLI."""


class SnapmatchError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SnapmatchError, ValueError):
    """A scalar parameter is outside its admissible range."""


class InvalidInputError(SnapmatchError, ValueError):
    """Array shapes, counts or indices are inconsistent."""


class NumericError(SnapmatchError, ArithmeticError):
    """A factorization failed or an iterate became non-finite."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


class FactorizationError(NumericError):
    """Cholesky factorization hit a non-positive pivot.

    ``pivot`` is the 0-based index of the failing diagonal entry.
    """

    def __init__(self, message, pivot):
        super().__init__(message, pivot=pivot)
        self.pivot = pivot


class DivergenceError(NumericError):
    """A rolled-out state or an inner iterate stopped being finite."""


class ParseError(SnapmatchError, ValueError):
    """A surface or config file could not be parsed."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ConfigError(SnapmatchError, ValueError):
    """A run configuration is missing keys or holds invalid values."""
