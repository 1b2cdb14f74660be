"""Exception types raised across the package."""


class XtalkError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(XtalkError, ValueError):
    pass


class InvalidGainError(XtalkError, ValueError):
    pass


class OutOfDomainError(XtalkError, ValueError):
    pass


class OutOfBandError(XtalkError, ValueError):
    pass


class NumericalError(XtalkError, ArithmeticError):
    """Base for failures the CLI reports with exit status 2."""


class SingularChannelError(NumericalError):
    def __init__(self, condition: float, message: str | None = None):
        self.condition = condition
        super().__init__(message or f"channel matrix is numerically singular (cond_1 ~ {condition:.3e})")


class NoConvergenceError(NumericalError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"fixed point did not converge after {iterations} iterations (residual {residual:.3e})")


class DerivativeSingularError(NumericalError):
    pass


class ConfigError(XtalkError, ValueError):
    """Bad configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
