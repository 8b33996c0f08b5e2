"""Exception types shared across the package.

The CLI maps these onto its exit codes, so keep the hierarchy flat:
parse errors, budget overruns, violated preconditions, and internal
consistency failures are the four externally visible failure modes.
"""

from __future__ import annotations


class PadicSumsError(Exception):
    """Base class for all package errors."""


class ParseError(PadicSumsError, ValueError):
    """Malformed textual input (polynomials, y vectors, phi specs)."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class BudgetExceededError(PadicSumsError):
    """An enumeration would visit more points than the configured budget."""

    def __init__(self, needed: int, budget: int, what: str = "points"):
        self.needed = needed
        self.budget = budget
        super().__init__(f"budget exceeded: {needed} {what} needed, budget is {budget}")


class PreconditionError(PadicSumsError, ValueError):
    """An operation was called outside its documented input domain."""


class SeriesFloorError(PreconditionError):
    """The declared valuation floor of a power series never reaches the
    requested truncation level, so the series is not certified to converge
    on the unit polydisc."""


class SeriesCertificationError(PadicSumsError):
    """A series coefficient violates the declared valuation floor."""


class ConsistencyError(PadicSumsError):
    """An exact internal identity failed; indicates a bug, never bad input."""


class FitError(PadicSumsError, ValueError):
    """Decay-exponent fitting is impossible on the given records."""


class ExactVanishingError(FitError):
    """All supplied records are exactly zero: there is nothing to fit, and
    the exact vanishing itself is the result."""
