"""Exception types shared across the toolkit.

Everything raised on purpose derives from ToolkitError so callers can
catch one base class at the CLI boundary.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidShape(ToolkitError):
    """An array argument has the wrong rank, size, or structure."""


class NumericalFailure(ToolkitError):
    """A numerical routine produced non-finite values or failed to converge."""


class SingularMatrix(ToolkitError):
    """A matrix is singular or too ill-conditioned to invert reliably."""


class DegenerateColumn(ToolkitError):
    """A data column is (numerically) constant and cannot be scaled.

    Carries the offending column index as ``column``.
    """

    def __init__(self, column: int, message: str | None = None):
        self.column = int(column)
        super().__init__(message or f"column {column} has (near-)zero variance")


class DegenerateSample(ToolkitError):
    """A sample is unusable for density estimation (constant, empty, ...)."""


class InvalidConfig(ToolkitError):
    """A configuration value violates its documented range or shape."""


class InsufficientRank(ToolkitError):
    """Fewer usable components are available than were requested."""


class FormatError(ToolkitError):
    """A file's structure does not match the expected layout."""


class ParseError(FormatError):
    """A file failed to parse; carries the 1-based ``line`` number."""

    def __init__(self, line: int, message: str):
        self.line = int(line)
        super().__init__(f"line {line}: {message}")
