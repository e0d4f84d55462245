"""Exception types shared across the package."""


class BilliardsError(Exception):
    """Base class for all package errors."""


class DomainError(BilliardsError, ValueError):
    """Input outside the mathematical domain of an operation."""


class BracketError(DomainError):
    """Root bracket does not enclose a sign change."""


class ConvexityError(BilliardsError, ValueError):
    """Boundary fails the strict convexity requirement."""


class TableConfigError(BilliardsError, ValueError):
    """Table description file is malformed or inconsistent."""


class SolverError(BilliardsError, RuntimeError):
    """Iterative solver did not converge.

    Carries the best iterate found (when there is one) in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConditioningError(BilliardsError, RuntimeError):
    """Least-squares design matrix too ill-conditioned to trust."""
