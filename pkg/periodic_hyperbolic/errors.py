"""Exceptions raised by the periodic_hyperbolic package.

Value-type problems also derive from ValueError and numerical failures from
RuntimeError, so callers that only know the builtin families still catch them.
"""


class PeriodicHyperbolicError(Exception):
    """Base class of all package errors."""


class BadParameters(PeriodicHyperbolicError, ValueError):
    """Preset or option parameters outside their documented range."""


class ProblemFormatError(PeriodicHyperbolicError, ValueError):
    """A problem file or field specification could not be parsed."""


class WrongShape(PeriodicHyperbolicError, ValueError):
    """The problem does not have the shape a criterion or operation requires."""


class UnsupportedBoundary(PeriodicHyperbolicError, ValueError):
    """The boundary operator does not expose the structure an operation needs."""


class BoundaryIncompatible(PeriodicHyperbolicError, ValueError):
    """A manufactured solution violates the boundary conditions of its problem."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class FactorizationViolated(PeriodicHyperbolicError, ValueError):
    """b_jk does not vanish where the speeds a_j and a_k coincide."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class StepCountExceeded(PeriodicHyperbolicError, RuntimeError):
    """Tracing a characteristic would need more RK4 steps than allowed."""


class NoConvergence(PeriodicHyperbolicError, RuntimeError):
    """The Neumann iteration for I - C did not reach its tolerance."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class DenseCapExceeded(PeriodicHyperbolicError, RuntimeError):
    """The nodal dimension is larger than the dense assembly cap."""


class QSingular(PeriodicHyperbolicError, RuntimeError):
    """The reduced boundary matrix Q(t) is not invertible at time t."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t
