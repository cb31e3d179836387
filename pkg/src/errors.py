"""
Errors - Exception hierarchy for the heavytail package.

Every failure raised by the library derives from HeavyTailError so callers
(the CLI and the API) can map whole families to exit codes or HTTP statuses.
"""

from typing import Optional


class HeavyTailError(Exception):
    """Base class for all package errors."""


class DomainError(HeavyTailError, ValueError):
    """A parameter lies outside the range an operation is defined on."""


class SupercriticalError(DomainError):
    """The critical-case root does not exist because c*pi*csc(pi*theta) >= theta."""

    def __init__(self, c: float, theta: float):
        self.c = c
        self.theta = theta
        super().__init__(
            f"supercritical: c*pi*csc(pi*theta) >= theta for c={c}, theta={theta} "
            "(the chain is transient and delta0 is undefined)"
        )


class NumericalError(HeavyTailError, ArithmeticError):
    """A numerical procedure did not reach its tolerance."""

    def __init__(self, message: str, achieved: Optional[float] = None):
        self.achieved = achieved
        if achieved is not None:
            message = f"{message} (achieved tolerance {achieved:.3e})"
        super().__init__(message)


class DivergenceError(NumericalError):
    """The requested moment or integral is infinite."""


class EstimationError(HeavyTailError):
    """Not enough usable data for a statistical estimate."""


class ConfigError(HeavyTailError):
    """Invalid configuration; names the offending field and, when known, the line."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
