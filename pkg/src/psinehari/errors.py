"""Exception types shared across the package."""


class PsinehariError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(PsinehariError):
    """Malformed configuration: unknown keys, bad types, unparseable values."""


class ShapeError(PsinehariError):
    """Field or operator shape incompatible with the grid or axis."""


class NonFiniteFieldError(PsinehariError):
    """A field contains NaN or infinite nodal values."""


class BoundaryMaskError(PsinehariError):
    """A candidate field violates the zero-boundary mask."""


class InvalidOrderError(PsinehariError):
    """Fractional order outside the admissible open interval."""


class InvalidPsiError(PsinehariError):
    """Weight function is not strictly increasing or has bad derivative values."""


class ZeroFieldError(PsinehariError):
    """Operation requires a nonzero field."""


class DegenerateDirectionError(PsinehariError):
    """Ray analysis needs strictly positive leading norms on the direction."""


class DomainError(PsinehariError):
    """Scalar argument outside the admissible domain (for example t <= 0)."""


class NoTwoRootStructureError(PsinehariError):
    """Fiber gap is nonpositive: the ray has no two-root crossing at this lambda.

    Carries the partial report (roots absent) and a degeneracy flag that is
    set when the gap vanishes within tolerance instead of being negative.
    """

    def __init__(self, message, report=None, degenerate=False):
        super().__init__(message)
        self.report = report
        self.degenerate = degenerate


class LambdaTooLargeError(PsinehariError):
    """Every attempted initialization lost the two-root structure."""


class NegativeCandidateError(PsinehariError):
    """Candidate field is negative at an interior node where positivity is required."""


class NumericalBreakdownError(PsinehariError):
    """Non-finite numbers appeared inside an iterative computation."""


class TwoSolutionFailure(PsinehariError):
    """Branch solves finished but the two-solution certificate failed.

    Carries whatever partial results were obtained so callers can report them.
    """

    def __init__(self, message, plus=None, minus=None):
        super().__init__(message)
        self.plus = plus
        self.minus = minus


class UnknownQuantityError(PsinehariError):
    """Requested reference quantity is not registered with the oracle."""
