"""
Exception hierarchy for fblab
"""
from typing import Any, List, Optional, Sequence, Tuple


class FreeBoundaryLabError(Exception):
    """Base class for every compute failure raised by the laboratory"""


class DomainError(FreeBoundaryLabError, ValueError):
    """An argument lies outside the domain where an operation is defined"""


class ConsistencyError(FreeBoundaryLabError, ValueError):
    """Field and zero set (or field and grid) disagree"""


class ConfigError(FreeBoundaryLabError, ValueError):
    """Run configuration could not be resolved"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConvergenceError(FreeBoundaryLabError):
    """An iteration hit its cap; carries the last iterate and its history"""

    def __init__(self, message: str, last_iterate: Any = None,
                 history: Optional[Sequence[Any]] = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.history: List[Any] = list(history) if history is not None else []


class BracketError(FreeBoundaryLabError):
    """A root search could not bracket a sign change"""

    def __init__(self, message: str, interval: Tuple[float, float]):
        super().__init__(f"{message} (scanned [{interval[0]:.6g}, {interval[1]:.6g}])")
        self.interval = interval
