class SluicePumpError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SluicePumpError, ValueError):
    pass


class DegenerateSpectrumError(SluicePumpError):
    pass


class InductancePoleError(SluicePumpError, ZeroDivisionError):
    pass


class QuadratureError(SluicePumpError, ArithmeticError):
    pass


class PositivityError(SluicePumpError):
    pass


class SteadyStateError(SluicePumpError):
    """Raised when the periodic steady state cannot be reached.

    Attributes
    ----------
    residual : float
        Last start-of-cycle difference (sup-norm).
    n_cycles : int
        Number of cycles integrated before giving up.
    """

    def __init__(self, message, residual=float("nan"), n_cycles=0):
        super().__init__(message)
        self.residual = residual
        self.n_cycles = n_cycles
