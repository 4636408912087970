"""
Error hierarchy for fso_link_lab.

Every error carries the process exit code the CLI maps it to, so agents can
record failures in the pipeline state without losing their category.
"""

from typing import Any, Dict


class FsoLinkError(Exception):
    """Base class for all library errors."""

    exit_code = 1

    def to_state(self) -> Dict[str, Any]:
        return {
            "kind": type(self).__name__,
            "message": str(self),
            "exit_code": self.exit_code,
        }


class ConfigError(FsoLinkError):
    """Invalid, unreadable or unknown configuration input."""

    exit_code = 2


class UnknownFigureError(ConfigError):
    pass


class DomainError(FsoLinkError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 3


class PoleError(DomainError):
    pass


class NoSolutionError(DomainError):
    pass


class GeometryError(DomainError):
    pass


class NumericalError(FsoLinkError):
    """A numerical procedure failed to produce a trustworthy value."""

    exit_code = 3


class ContourSeparationError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class SeriesDivergenceError(NumericalError):
    pass


class DegenerateExponentError(NumericalError):
    pass


class EmptySampleError(FsoLinkError, ValueError):
    exit_code = 3


class SelfCheckError(FsoLinkError):
    exit_code = 4


class AcceptanceError(SelfCheckError):
    """A figure value fell outside the tolerance of its published reference (strict runs)."""


def error_to_state(exc: BaseException) -> Dict[str, Any]:
    """Convert any exception into the `state["error"]` record used by the agents."""
    if isinstance(exc, FsoLinkError):
        return exc.to_state()
    return {"kind": type(exc).__name__, "message": str(exc), "exit_code": 1}
