"""Exception and warning types raised across the package."""
from __future__ import annotations


class C2ApproxError(Exception):
    """Base class for all package errors."""


class PointOutsideDomainError(C2ApproxError, ValueError):
    pass


class AboveGraphError(C2ApproxError, ValueError):
    """A point lies above the graph of a chart (outside its closure)."""


class ChartSlopeError(C2ApproxError, ValueError):
    """The chart parameter ``L`` is too small for the slope of ``g``."""


class EmptyBallError(C2ApproxError, ValueError):
    pass


class EmptyRegionError(C2ApproxError, ValueError):
    pass


class EmptySlabError(C2ApproxError, ValueError):
    pass


class ParameterTooSmallError(C2ApproxError, ValueError):
    """A partition parameter violates its admissibility inequality."""


class DegreeBudgetError(C2ApproxError, RuntimeError):
    pass


class ChainingError(C2ApproxError, ValueError):
    pass


class ExponentOrderError(C2ApproxError, ValueError):
    pass


class RankDeficiencyError(C2ApproxError, ArithmeticError):
    pass


class NonConvergenceError(C2ApproxError, RuntimeError):
    """Raised when an iterative solver stalls; carries the best iterate."""

    def __init__(self, message, best=None, error=None):
        super().__init__(message)
        self.best = best
        self.error = error


class ResolutionError(C2ApproxError, ValueError):
    pass


class GridTooCoarseWarning(UserWarning):
    pass


class IllConditionedWarning(UserWarning):
    pass
