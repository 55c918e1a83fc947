"""Exception types shared across the package."""


class BandselError(Exception):
    """Base class for all package errors."""


class ValidationError(BandselError, ValueError):
    """Invalid inputs: shapes, names, file content, or domain constraints."""


class ParseError(ValidationError):
    """Malformed content in an input file."""


class ConvergenceError(BandselError, RuntimeError):
    """An iterative solver did not converge within its iteration budget."""
