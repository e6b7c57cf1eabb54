"""Exception hierarchy.

Validation problems derive from :class:`ValueError` so callers that only
care about bad input can catch the builtin; numerical failures carry the
diagnostic payload needed to reproduce them.
"""

from __future__ import annotations


class NRLZError(Exception):
    """Base class for all package errors."""


class ValidationError(NRLZError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(NRLZError, ArithmeticError):
    """A numerical procedure failed to deliver its postcondition."""


class StiffnessError(NumericalError):
    def __init__(self, message: str, gamma: float):
        super().__init__(f"{message} (gamma={gamma!r})")
        self.gamma = gamma


class EigenstateSearchError(NumericalError):
    def __init__(self, message: str, grid=None):
        super().__init__(message)
        self.grid = grid


class LoopBoundaryError(NumericalError):
    def __init__(self, message: str, bracket=None):
        super().__init__(f"{message}; bracket={bracket!r}")
        self.bracket = bracket


class PhaseSpaceBoundaryError(NumericalError):
    """|s| reached 1 where the reduced phase equation diverges."""


class HomoclinicTraceError(NumericalError):
    pass
