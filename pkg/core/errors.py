"""
Exception hierarchy for PulseForge
"""

from typing import Any, List, Optional


class PulseForgeError(Exception):
    """Base class for every error raised by the toolkit"""


class ConfigurationError(PulseForgeError):
    """Unknown tag, dimension mismatch or invalid variant/order combination"""


class DomainError(PulseForgeError, ValueError):
    """Argument outside the domain of a special function or analytic family"""


class RequestOutOfRangeError(PulseForgeError):
    """Requested time lies beyond the grid of a control field"""


class FieldError(PulseForgeError):
    """Control field violates the invariants of its representation"""


class SingularFlowError(PulseForgeError):
    """The time-cost normalization r vanished along a flow"""

    def __init__(self, time: float, point: Optional[Any] = None, message: str = ""):
        self.time = float(time)
        self.point = point
        super().__init__(message or f"singular flow: r fell below threshold at t = {self.time:.9g}")


class NotFoundError(PulseForgeError):
    """No robust solution met the feasibility tolerance"""

    def __init__(self, message: str, candidates: Optional[List[Any]] = None):
        self.candidates = list(candidates or [])
        super().__init__(message)


class PulseFileError(PulseForgeError):
    """Malformed pulse or profile CSV"""

    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


class GradientError(PulseForgeError):
    """Non-finite GRAPE gradient"""

    def __init__(self, message: str, iterate: Any = None):
        self.iterate = iterate
        super().__init__(message)
