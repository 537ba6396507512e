"""Typed errors raised across the package."""

from __future__ import annotations


class DgsaError(Exception):
    """Base class for all package errors."""


class DegenerateStateError(DgsaError):
    """A state with (numerically) zero norm was given where a direction is needed."""


class ShapeMismatchError(DgsaError, ValueError):
    """Lengths, physical or bond dimensions of operands do not match."""


class ComplexResultError(DgsaError):
    """An expectation value was requested for an operator not flagged Hermitian."""


class BudgetExceededError(DgsaError):
    """A propagator or AGSP error budget cannot be met.

    Attributes
    ----------
    achieved : float
        The best error that was reached before giving up.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error {achieved:.3e})")
        self.achieved = achieved


class PreconditionError(DgsaError):
    """A hypothesis the caller must guarantee does not hold."""


class SpanError(DgsaError):
    """A state that must lie in a span is not representable in it."""


class StageError(DgsaError):
    """A pipeline stage failed; carries the (h, i, stage) context.

    Parameters
    ----------
    h : int
        Index of the ground state being sought.
    i : int
        Number of sites covered when the failure happened.
    stage : str
        Stage tag such as ``"S2"`` (trim) or ``"final"``.
    detail : str
        Human-readable reason.
    """

    def __init__(self, h: int, i: int, stage: str, detail: str):
        super().__init__(f"h={h} i={i} stage={stage}: {detail}")
        self.h = h
        self.i = i
        self.stage = stage
        self.detail = detail


class TrimFailureError(StageError):
    """Every net point of the trim program came back infeasible."""


class ConfigError(DgsaError, ValueError):
    """Invalid run configuration."""
