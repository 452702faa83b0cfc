"""Exception types raised by the solvers and kernels."""


class DomainError(ValueError):
    """A power or log transform received a nonpositive argument."""


class BracketError(ValueError):
    """Root bracket has no sign change."""

    def __init__(self, message, lo=None, hi=None, r_lo=None, r_hi=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi
        self.r_lo = r_lo
        self.r_hi = r_hi


class NonMonotoneGridError(RuntimeError):
    """The endogenous cash-on-hand grid is not strictly increasing.

    An upper-envelope step would be needed to recover the policy; that
    refinement is not implemented.
    """

    def __init__(self, message, state=None, index=None):
        super().__init__(message)
        self.state = state
        self.index = index


class MaxItersError(RuntimeError):
    """Fixed-point iteration hit its cap before converging."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ConstrainedPointError(ValueError):
    """Euler error requested at a point where the borrowing constraint binds."""


class ExistenceWarning(UserWarning):
    """Parameters violate the sufficient condition ``beta * R**theta < 1``."""
