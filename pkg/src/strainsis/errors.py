"""Exception hierarchy shared by all modules."""


class StrainSISError(Exception):
    """Base class for package errors."""


class ValidationError(StrainSISError, ValueError):
    """Coefficient or configuration data violates a model bound."""


class PreconditionError(StrainSISError, ValueError):
    """An operation was called outside the hypotheses it relies on."""


class ConvergenceError(StrainSISError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance.

    ``last_residual`` carries the final residual or increment when known.
    """

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class PositivityError(StrainSISError, RuntimeError):
    """A time step produced a density undershoot beyond roundoff level."""

    def __init__(self, message, step_index=None, time=None):
        super().__init__(message)
        self.step_index = step_index
        self.time = time


class SolverError(StrainSISError, RuntimeError):
    """Internal numerical failure (singular solve, bracket failure, ...)."""
