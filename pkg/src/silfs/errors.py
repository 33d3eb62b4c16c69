"""Exception hierarchy shared by every module of the package."""


class SilfsError(Exception):
    """Base class for all errors raised by :mod:`silfs`."""

    exit_code = 1


class InvalidArgumentError(SilfsError, ValueError):
    """An argument is outside the domain an operation accepts."""

    exit_code = 2


class DataError(SilfsError, ValueError):
    """Input data could not be parsed or contains unusable values."""

    exit_code = 3


class NumericalFailureError(SilfsError, ArithmeticError):
    """A linear solve, eigensolver or objective evaluation broke down."""

    exit_code = 4


class SelectionFailureError(SilfsError):
    """Every candidate fit of a model-selection grid failed."""

    exit_code = 4


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped at its iteration cap."""
