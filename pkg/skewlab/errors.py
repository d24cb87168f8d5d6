from typing import Any, Optional


class SkewlabError(Exception):
    """Base class of every error raised by skewlab."""


class ConfigError(SkewlabError):
    pass


class NonConvergence(SkewlabError):
    pass


class DomainError(SkewlabError):
    pass


class DegenerateFiber(SkewlabError):
    pass


class DegreeMismatch(SkewlabError, ValueError):
    pass


class DegreeOverflow(SkewlabError):
    pass


class EmptyBoundary(SkewlabError):
    pass


class EmptyCloud(SkewlabError):
    pass


class RangeError(SkewlabError, ValueError):
    pass


class NoRealFixedPoint(SkewlabError):
    pass


class Inconclusive(SkewlabError):
    pass


class ResonanceError(SkewlabError):
    pass


class PreconditionViolation(SkewlabError):
    pass


class PerturbationTooLarge(SkewlabError):
    pass


class PerturbationTooSmall(SkewlabError):
    pass


class RayBlocked(SkewlabError):
    """Newton continuation of an external ray stalled.

    Parameters
    ----------
    message : str
        description
    last_potential : float
        potential of the last point that was traced successfully
    trace : Any, optional
        partial trace up to the blocking point
    """

    def __init__(self, message: str, last_potential: float, trace: Any = None):
        super().__init__(message)
        self.last_potential = last_potential
        self.trace = trace


class NotBracketed(SkewlabError):
    def __init__(self, message: str, scan: Optional[Any] = None):
        super().__init__(message)
        self.scan = scan


class Unreached(SkewlabError):
    def __init__(self, message: str, witness: Optional[complex] = None):
        super().__init__(message)
        self.witness = witness


class CounterexampleFound(SkewlabError):
    def __init__(self, message: str, witness: Optional[tuple] = None):
        super().__init__(message)
        self.witness = witness
