"""Exception types shared across the solver library."""


class MsdgError(Exception):
    """Base class for all library errors."""


class InvalidConfigError(MsdgError):
    """Raised for invalid meshes, parameters, flux scalars, or config files."""


class SingularOperatorError(MsdgError):
    """Raised when a factorization encounters a (numerically) singular matrix.

    Carries the offending pivot magnitude in ``pivot``.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class InconsistentRhsError(MsdgError):
    """Raised when a zero-mean solve receives a right-hand side with nonzero mean."""


class BlowUpError(MsdgError):
    """Raised when a time integration produces non-finite state.

    Carries the step index and simulation time at which the blow-up occurred.
    """

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time
