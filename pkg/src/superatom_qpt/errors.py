"""Exception types shared across the package."""


class SuperatomError(Exception):
    """Base class for all package errors."""


class InvalidArgument(SuperatomError, ValueError):
    pass


class InvalidRecord(SuperatomError, ValueError):
    """Tomography data that cannot be inverted (out-of-range or ill-formed)."""


class IntegrationFailure(SuperatomError, RuntimeError):
    """The adaptive integrator could not advance past ``time``."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConvergenceFailure(SuperatomError, RuntimeError):
    """Constrained minimisation ran out of budget.

    The best iterate and its residuals are attached so callers can decide
    whether the result is still usable.
    """

    def __init__(self, message, best=None, residual=None, violation=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.violation = violation


class InvalidConfig(InvalidArgument):
    """An experiment configuration failed validation.

    ``diagnostics`` lists one ``"key: problem"`` string per offending entry.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.diagnostics))
