"""Exception hierarchy shared by all solver modules."""


class EigensolveError(Exception):
    """Base class for every error raised by this package."""


class NonConformingSpacing(EigensolveError, ValueError):
    """Box width is not an integer multiple of the grid spacing."""


class EmptyInterior(EigensolveError, ValueError):
    """The lattice has no node whose whole stencil fits in the box."""


class NonFinite(EigensolveError, ArithmeticError):
    """A scheme evaluator returned NaN or infinity."""


class EmptyFamily(EigensolveError, ValueError):
    pass


class NonPositiveIterate(EigensolveError, ValueError):
    """A candidate eigenfunction is not strictly positive on the interior."""


class NoConvergence(EigensolveError, RuntimeError):
    """An iterative method stopped before meeting its tolerance.

    The partial result, when there is one, is kept in ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NotLinear(EigensolveError, ValueError):
    pass


class SingularShift(EigensolveError, ArithmeticError):
    pass


class SizeGuard(EigensolveError, ValueError):
    pass


class NoPositiveEigenvector(EigensolveError, ArithmeticError):
    pass


class MonotonicityViolation(EigensolveError, ArithmeticError):
    """Monotone iterates decreased; the scheme is not of positive type."""


class BadBracket(EigensolveError, ValueError):
    pass


class ConfigError(EigensolveError, ValueError):
    pass


class NotMonotone(UserWarning):
    """The pseudo-time residual kept increasing; the step may be too large."""
