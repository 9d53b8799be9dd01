"""Exception hierarchy and compatibility helpers."""

import sys

# ExceptionGroup is available in Python 3.11+, but we need to handle older versions
if sys.version_info >= (3, 11):
    from builtins import ExceptionGroup  # noqa: F401
else:
    # For Python < 3.11, define a basic ExceptionGroup
    class ExceptionGroup(Exception):  # noqa: N818
        """Compatibility ExceptionGroup for Python < 3.11."""

        def __init__(self, message: str, exceptions: list[Exception]) -> None:
            super().__init__(message)
            self.exceptions = exceptions


class UdaBenchError(Exception):
    """Base exception class for all uda-bench errors."""

    pass


class ShapeError(UdaBenchError):
    """A graph node received operands with incompatible shapes."""

    pass


class NumericError(UdaBenchError):
    """A computation produced non-finite values or failed to converge."""

    pass


class DegenerateVarianceError(NumericError):
    """Importance weights have (near) zero variance."""

    pass


class ConfigurationError(UdaBenchError):
    """A configuration is invalid or a required reference is missing."""

    pass


class InputError(UdaBenchError):
    """A function received inputs outside its domain."""

    pass


class SearchError(UdaBenchError):
    """Every trial of a hyperparameter search failed."""

    pass


class FormatError(UdaBenchError):
    """A file does not match its expected format.

    Exactly one of ``offset`` (byte offset, binary formats) or ``line``
    (1-based line number, text formats) is usually set.
    """

    def __init__(
        self, message: str, *, offset: int | None = None, line: int | None = None
    ) -> None:
        location = ""
        if offset is not None:
            location = f" (at byte offset {offset})"
        elif line is not None:
            location = f" (at line {line})"
        super().__init__(f"{message}{location}")
        self.offset = offset
        self.line = line


def unwrap_group(error: BaseException) -> BaseException:
    """Return the first leaf exception of a (possibly nested) ExceptionGroup."""
    while isinstance(error, ExceptionGroup) and error.exceptions:
        error = error.exceptions[0]
    return error


__all__ = [
    "ConfigurationError",
    "DegenerateVarianceError",
    "ExceptionGroup",
    "FormatError",
    "InputError",
    "NumericError",
    "SearchError",
    "ShapeError",
    "UdaBenchError",
    "unwrap_group",
]
