"""Exception hierarchy.

Validation errors (bad input) and numerical errors (non-convergence,
escaping trajectories, density leaking to the grid edge) are kept apart so
the command line can map them to distinct exit codes.
"""


class ComtrapError(Exception):
    """Base class for all package errors."""


class ValidationError(ComtrapError, ValueError):
    """Input rejected before any computation."""


class FrameError(ValidationError):
    """Operation requested in a reference frame where it is undefined."""


class NumericalError(ComtrapError, RuntimeError):
    """A computation started but could not deliver a trustworthy result."""


class InstabilityAbort(NumericalError):
    """Classical trajectory escaped beyond the allowed amplitude.

    The partial trajectory integrated up to the abort is kept on
    ``trajectory``.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class BoundaryLeakError(NumericalError):
    """Density reached the edge of the simulation box."""

    def __init__(self, message, leak):
        super().__init__(message)
        self.leak = leak


class ConvergenceError(NumericalError):
    """Iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual
