"""Exception types raised by latticefibers."""


class LatticeFibersError(Exception):
    """Base class for package errors."""


class DimensionMismatchError(LatticeFibersError, ValueError):
    pass


class UndecidableSupportError(LatticeFibersError, ValueError):
    pass


class DecompositionError(LatticeFibersError, ValueError):
    """Raised when a fiber decomposition is requested at a nondegenerate k."""


class HypothesisUncertifiedError(LatticeFibersError, ValueError):
    pass


class NoClosedFormError(LatticeFibersError, ValueError):
    pass


class DegenerateThresholdError(LatticeFibersError, ArithmeticError):
    """A Birman-Schwinger eigenvalue sits on the counting threshold."""


class ConvergenceError(LatticeFibersError, RuntimeError):
    """Iterative eigensolver did not converge.

    Attributes
    ----------
    residual : float
        Largest residual norm among the best available Ritz pairs.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual
