"""Exception types shared across the package."""


class LanesafeError(Exception):
    """Base class for all package errors."""


class InvalidScenario(LanesafeError):
    """A scenario violates a structural invariant (ordering, signs, flags)."""


class GapTooSmall(LanesafeError):
    """An initial inter-vehicle gap is below the minimum safe margin."""


class Infeasible(LanesafeError):
    """No deceleration within mechanical limits keeps the safe margin."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class EvasionInfeasible(LanesafeError):
    """No evasion trajectory avoids the margin violation, even braking from t=0."""


class PlanExhausted(LanesafeError):
    """An evasion plan was queried past its horizon after completion."""


class ShapeMismatch(LanesafeError):
    """Network layer dimensions do not chain with the given input."""


class EmptyResults(LanesafeError):
    """A results writer was called with no rows."""
