"""
Exception hierarchy for the cloaking toolkit.

Every error raised by the library derives from CloakingError so the
experiment runner can map failures onto process exit codes.
"""

from typing import Optional


class CloakingError(Exception):
    """Root of all toolkit errors."""


class DomainError(CloakingError, ValueError):
    """Input outside the mathematical domain (non-SPD tensor, bad profile)."""


class SingularSetError(DomainError):
    """Evaluation on (or within the cutoff distance of) a declared singular set."""


class ParameterError(CloakingError, ValueError):
    """Parameter outside its admissible range."""


class ResonanceError(CloakingError, ArithmeticError):
    """Interface linear system is numerically singular at this frequency."""

    def __init__(self, frequency: float, degree: Optional[int] = None, condition: float = float("inf")):
        self.frequency = frequency
        self.degree = degree
        self.condition = condition
        where = f" at degree l={degree}" if degree is not None else ""
        super().__init__(
            f"Resonance at omega={frequency:.12g}{where} (condition number {condition:.3e})"
        )


class PreconditionError(CloakingError):
    """A hypothesis of the cloaking theorem is violated."""

    def __init__(self, message: str, eigenvalue: Optional[float] = None):
        self.eigenvalue = eigenvalue
        super().__init__(message)


class NumericalError(CloakingError, RuntimeError):
    """Integrator or root finder failed."""


class ConfigError(CloakingError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(prefix + message)


class OutputError(CloakingError, OSError):
    """Output file could not be written."""


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESONANCE = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5


def exit_code_for(exc: BaseException) -> int:
    """
    Map an exception onto the CLI exit code table.

    Args:
        exc: Exception raised while running an experiment

    Returns:
        Process exit code (2 config, 3 resonance, 4 numerical, 5 I/O)
    """
    if isinstance(exc, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    if isinstance(exc, (ResonanceError, PreconditionError)):
        return EXIT_RESONANCE
    if isinstance(exc, (OutputError, OSError)):
        return EXIT_IO
    return EXIT_NUMERICAL
