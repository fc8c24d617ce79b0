"""Exception types raised by the solvers and the analytic family."""


class NLBSError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NLBSError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class SingularDenominator(NLBSError, ArithmeticError):
    """``1 - rho*S*u_SS`` has (numerically) vanished.

    This happens on the degenerate surface ``(1/rho) S ln S + S c1(t) + c2(t)``.
    """

    def __init__(self, message, *, min_abs_denominator=None):
        super().__init__(message)
        self.min_abs_denominator = min_abs_denominator


class DegenerateFamily(NLBSError, ValueError):
    """The explicit family was asked for ``m = 0``; use ``trivial_u`` instead."""


class NoConvergence(NLBSError, RuntimeError):
    """Newton iteration hit its iteration cap."""

    def __init__(self, message, *, residual_norm=None, iterations=None, layer=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations
        self.layer = layer


class SingularJacobian(NLBSError, ArithmeticError):
    """The Newton linear system could not be solved."""


class UnknownCheck(NLBSError, KeyError):
    """A validation check name is not registered."""


class ScenarioError(NLBSError, ValueError):
    """A scenario file failed to parse or validate."""

    def __init__(self, message, *, line=None, field=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field
