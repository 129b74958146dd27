"""Exception types raised across the package.

Domain and shape violations subclass ``ValueError`` so callers that only
know numpy conventions still catch them; solver failures carry enough
state (gap, sweep count) to be reported without re-running.
"""

from __future__ import annotations


class BmlError(Exception):
    """Base class for all package-specific errors."""


class DomainError(BmlError, ValueError):
    """An argument is outside the mathematically supported domain."""


class ShapeError(BmlError, ValueError):
    """Dimensions of two inputs do not agree."""


class DegenerateGram(BmlError, ArithmeticError):
    """The n-by-n Gram matrix is numerically singular.

    Raised when a Cholesky pivot falls below ``1e-12 * tr(G) / n`` or the
    factorization fails outright.
    """


class NotSeparable(BmlError, RuntimeError):
    """The training set admits no positive-margin linear separator."""


class NotConverged(BmlError, RuntimeError):
    """Iteration budget exhausted before the tolerance was met."""

    def __init__(self, message: str, gap: float | None = None, sweeps: int | None = None):
        super().__init__(message)
        self.gap = gap
        self.sweeps = sweeps


class NotExact(BmlError, ValueError):
    """A closed-form result was requested for a model that has none."""


class StepTooLarge(BmlError, RuntimeError):
    """Gradient descent diverged (loss rose over consecutive checkpoints)."""


class InsufficientData(BmlError, ValueError):
    """Too few usable points for the requested fit."""


class InternalInvariantViolation(BmlError, AssertionError):
    """A quantity that is provably positive/finite came out otherwise."""
