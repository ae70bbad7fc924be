"""Exception hierarchy shared by every subsystem.

The CLI maps each class to a distinct exit status (see ``EXIT_CODES``).
"""

from __future__ import annotations


class TowGameError(Exception):
    """Base class for all package errors."""


class ConfigurationError(TowGameError, ValueError):
    """Inconsistent parameters, data or run configuration."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class GeometryError(TowGameError, ValueError):
    """A grid cannot support the requested operation."""


class CoverageError(GeometryError):
    """A point falls outside the lattice region carrying field values."""


class ContractViolation(TowGameError, RuntimeError):
    """An operation was called outside its precondition."""


class NumericError(TowGameError, ArithmeticError):
    """Non-finite values appeared during a computation."""


class ConvergenceError(TowGameError, RuntimeError):
    """Fixed-point iteration hit its cap before reaching tolerance."""

    def __init__(self, message: str, residual: float, level: int | None = None):
        self.residual = residual
        self.level = level
        super().__init__(message)


class StrategyContractError(TowGameError, RuntimeError):
    """A strategy proposed a move outside the closed step ball."""

    def __init__(self, message: str, trajectory: int | None = None):
        self.trajectory = trajectory
        super().__init__(message)


class RunawayError(TowGameError, RuntimeError):
    """A trajectory exceeded the step cap."""


class FormatError(TowGameError, ValueError):
    """Malformed on-disk artifact."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


EXIT_CODES = {
    ConfigurationError: 2,
    GeometryError: 2,
    NumericError: 3,
    ConvergenceError: 4,
    FormatError: 5,
    StrategyContractError: 6,
    RunawayError: 6,
}


def exit_code_for(exc: BaseException) -> int:
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return 1
