"""
Exceptions and warning categories raised by fracstefan.

All numerical failures derive from SolverError, so that callers (the
command-line interface in particular) can tell them apart from invalid
input, which is reported with ValueError.
"""

__all__ = [
    "SolverError",
    "SeriesNonConvergence",
    "QuadratureError",
    "BracketError",
    "CFLViolation",
    "SingularSystem",
    "FixedPointNonConvergence",
    "OrderingViolation",
    "ConfigError",
    "FrontStagnationWarning",
    "ClampWarning",
]


class SolverError(Exception):
    """
    Base class of the errors raised by a numerical procedure.
    """


class SeriesNonConvergence(SolverError, ArithmeticError):
    """
    Raised when a power series does not meet its tail bound within the
    allowed number of terms.
    """


class QuadratureError(SolverError, ArithmeticError):
    """
    Raised when an adaptive quadrature cannot reach the requested
    absolute tolerance.
    """


class BracketError(SolverError, ValueError):
    """
    Raised when a root cannot be bracketed.
    """


class CFLViolation(SolverError, ValueError):
    """
    Raised when an explicit advection step would exceed its stability
    bound.
    """


class SingularSystem(SolverError, ArithmeticError):
    """
    Raised when the implicit part of a time step cannot be solved.

    condition -- estimate of the condition number of the system.
    """

    def __init__(self, msg, condition=float("inf")):
        super().__init__(msg)
        self.condition = condition


class FixedPointNonConvergence(SolverError, ArithmeticError):
    """
    Raised when the front fixed-point iteration does not converge.

    history -- sequence of sup-norm differences between iterates.
    """

    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = tuple(history)


class OrderingViolation(SolverError):
    """
    Raised when computed fronts that must be ordered are not.
    """


class ConfigError(ValueError):
    """
    Raised for malformed or invalid run configurations.

    line -- line number in the configuration file (None for flags).
    key -- offending key, if any.
    """

    def __init__(self, msg, line=None, key=None):
        if line is not None:
            msg = "line %d: %s" % (line, msg)
        super().__init__(msg)
        self.line = line
        self.key = key


class FrontStagnationWarning(UserWarning):
    """
    The front did not move over a whole window of steps although the
    boundary flux is positive.
    """


class ClampWarning(UserWarning):
    """
    The front velocity had to be clamped into [0, M] by more than the
    tolerance.
    """
