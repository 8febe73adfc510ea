"""Exception hierarchy shared by all modules.

The CLI maps :class:`ValidationError` to exit status 2 and every other
:class:`VibroliftError` to exit status 3.
"""


class VibroliftError(Exception):
    """Base class for package errors."""


class ValidationError(VibroliftError, ValueError):
    """Invalid input: bad parameters, malformed files, violated invariants."""


class InfeasibleError(ValidationError):
    """A transport bound is violated.

    ``bound`` names the violated bound (see :mod:`vibrolift.analysis`).
    """

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class DivergenceError(VibroliftError, RuntimeError):
    """Part velocity exceeded the divergence bound during a simulation.

    The partial trajectory up to the failure is kept on ``trajectory``.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NotConvergedError(VibroliftError, RuntimeError):
    """Per-period displacement has not settled to a steady state."""

    def __init__(self, message, displacements=None):
        super().__init__(message)
        self.displacements = displacements
