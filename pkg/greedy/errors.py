"""
Exception hierarchy shared by the library, the harness and the CLI.

Step-level failures inside an algorithm loop are caught by the run procedure
and recorded as a stop reason; everything else propagates to the caller.
"""

from __future__ import annotations


class GreedyError(Exception):
    """Base class for every error raised by the ``greedy`` package."""


class DimensionMismatchError(GreedyError, ValueError):
    """A vector's length does not match the dimension of its space."""


class ZeroVectorError(GreedyError, ValueError):
    """An operation needs a non-zero element (norming functional, line search)."""


class ZeroFunctionalError(GreedyError):
    """The functional vanishes on the whole dictionary (‖F‖_D = 0)."""


class GuardExceededError(GreedyError):
    """A combinatorial enumeration would exceed its certified budget."""


class HypothesisViolationError(GreedyError, ValueError):
    """Parameters do not satisfy the hypotheses of the statement being simulated."""


class SingularSystemError(GreedyError):
    """A linear system is numerically singular (pivot below threshold)."""

    def __init__(self, message: str, pivot: float) -> None:
        super().__init__(message)
        self.pivot = pivot


class ProjectionError(GreedyError):
    """The convex projector did not reach its KKT tolerance."""

    def __init__(self, message: str, kkt_violation: float) -> None:
        super().__init__(message)
        self.kkt_violation = kkt_violation


class FormatError(GreedyError, ValueError):
    """A dictionary, matrix, signal or trace file is malformed."""
