"""Exception and warning types raised across the package."""


class SBMError(Exception):
    """Base class for all errors raised by sbmclt."""


class ModelError(SBMError, ValueError):
    """A kernel, type profile or model file violates one of its invariants."""


class DimensionError(ModelError):
    pass


class DomainError(SBMError, ValueError):
    pass


class IrreducibilityError(ModelError):
    pass


class NegativeRateError(ModelError):
    pass


class ConvergenceError(SBMError, RuntimeError):
    pass


class SingularMatrixError(SBMError, ArithmeticError):
    pass


class SubcriticalError(SBMError):
    """The model has no giant component (Perron eigenvalue of KM is <= 1)."""

    def __init__(self, lambda1: float, message: str | None = None):
        self.lambda1 = float(lambda1)
        super().__init__(message or f"subcritical: lambda1={self.lambda1:.2f} ≤ 1")


class NearCriticalWarning(UserWarning):
    """Perron eigenvalue within 1e-10 of 1; the supercritical/subcritical call is unreliable."""
