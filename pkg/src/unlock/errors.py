"""Exception hierarchy shared by all unlock modules."""


class UnlockError(Exception):
    """Base class for every error raised by this package."""


class StructuralError(UnlockError, ValueError):
    """A chain or linkage violates a structural invariant (vertex counts, zero-length bars, ...)."""


class SimplicityError(UnlockError, ValueError):
    """A linkage is not simple.

    ``segments`` holds the two offending global segment ids, ``kind`` the
    :class:`~unlock.geometry.IntersectionKind` describing the contact.
    """

    def __init__(self, message, segments=None, kind=None):
        super().__init__(message)
        self.segments = segments
        self.kind = kind


class NumericalError(UnlockError, ArithmeticError):
    """Base class for numerical failures (as opposed to bad input)."""


class QPError(NumericalError):
    pass


class MaxItersExceeded(QPError):
    pass


class InfeasibleDetected(QPError):
    pass


class QpDidNotConverge(QPError):
    pass


class InfeasibleAfterRetries(QPError):
    """No expansive velocity was found even after repeatedly shrinking the strut demand."""


class NewtonDidNotConverge(NumericalError):
    pass


class LPSolverError(NumericalError):
    """The simplex solver failed numerically (distinct from a clean infeasibility verdict)."""


class LiftClosureError(NumericalError):
    """Gradient jumps around some vertex do not close up: the stress is not in equilibrium."""


class DegeneratePosition(UnlockError, ValueError):
    pass


class BarsNotExtendable(UnlockError):
    pass


class UnexpectedDofCount(NumericalError):
    pass


class FlipNotUnique(NumericalError):
    pass


class StepSizeUnderflow(NumericalError):
    pass


class ProjectionDiverged(NumericalError):
    pass


class LinkageSyntaxError(UnlockError, SyntaxError):
    """Malformed linkage document; ``lineno``/``offset`` point into the text when known."""
