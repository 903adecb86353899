# utils_errors.py
"""Exception hierarchy shared by every service module.

Verification routines report failures in their return values; these
exceptions are raised only when a precondition does not hold.
"""


class SpreadLabError(ValueError):
    """Base class for all precondition failures."""


class DomainError(SpreadLabError):
    """Argument outside a function's domain, or the horizon is exhausted."""


class ParameterError(SpreadLabError):
    """A parameter violates the precondition of an operation."""


class InvariantError(SpreadLabError):
    """A value does not satisfy the invariants of its type."""


class InputFormatError(SpreadLabError):
    """Malformed CSV, JSON or RLE input."""


class LatticeValidationError(SpreadLabError):
    def __init__(self, reason: str, pair=None):
        self.reason = reason
        self.pair = tuple(pair) if pair is not None else None
        msg = reason if self.pair is None else f"{reason} (pair {self.pair[0]!r}, {self.pair[1]!r})"
        super().__init__(msg)


class InsufficientWitnessError(SpreadLabError):
    def __init__(self, subset, bound):
        self.subset = tuple(sorted(subset))
        self.bound = bound
        super().__init__(f"no logged request for A={list(self.subset)} with N>={bound}")
