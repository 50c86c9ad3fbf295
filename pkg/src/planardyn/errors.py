"""Exception types shared across the toolkit."""


class PlanardynError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(PlanardynError):
    """A parameter block violates a map-family invariant."""


class DomainError(PlanardynError):
    """An operation was called with input outside its domain."""


class DegenerateInversionError(PlanardynError):
    """An analytic inverse branch is undefined (zero denominator)."""


class NonInvertiblePointError(PlanardynError):
    """The requested inverse does not exist at this point."""


class ResonanceObstruction(PlanardynError):
    """A normal-form term cannot be eliminated; names the blocked term."""

    def __init__(self, term, denominator):
        self.term = term
        self.denominator = denominator
        super().__init__(f"resonant obstruction at term {term}: "
                         f"denominator {denominator:.3e}")


class RegionEscapeError(PlanardynError):
    """An orbit left the region where the requested branch applies."""


class StripCollisionError(PlanardynError):
    """A closed-form orbit has a point inside the blend strip."""


class ConvergenceError(PlanardynError):
    """An iterative solver failed to converge."""


class SingularMatrixError(PlanardynError):
    """A linear solve inside an iteration hit a singular matrix."""


class NotASaddleError(PlanardynError):
    """The fixed point does not have a real saddle spectrum."""


class BadBracketError(PlanardynError):
    """A bisection bracket does not straddle the sought event."""


class BasisError(PlanardynError):
    """Eigenvector basis is singular or ill-conditioned."""


class ConditioningError(PlanardynError):
    """A least-squares fit is too ill-conditioned to trust."""


class ContinuationError(PlanardynError):
    """A branch continuation lost the solution; carries the last good value."""

    def __init__(self, message, last_good=None):
        self.last_good = last_good
        super().__init__(message)
