"""Exception hierarchy shared across the package.

The three bases map onto the CLI exit codes: ValidationError -> 1,
DataError -> 2, NumericError -> 3.
"""


class SpanlinkError(Exception):
    """Base class for all package errors."""


class ValidationError(SpanlinkError):
    """Bad configuration or arguments (missing paths, out-of-range values)."""


class DataError(SpanlinkError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """A line of an input file could not be parsed."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class AlignmentError(DataError):
    """A gold mention does not line up with the document text or tokens."""


class NumericError(SpanlinkError):
    """Non-finite loss or other numeric failure during training."""
