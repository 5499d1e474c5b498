"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(DomainError):
    """A density is too close to zero for the SDE coefficients to be evaluated."""


class ConvergenceError(RuntimeError):
    """An iterative numerical procedure failed to converge.

    The ``diagnostics`` mapping carries whatever the failing routine knew
    at the time (best iterate, iteration count, residuals, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
