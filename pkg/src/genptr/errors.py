class GenPtrError(Exception):
    """Base class for errors raised by genptr."""


class DomainError(GenPtrError, ValueError):
    """An argument is outside the domain where the operation is defined."""


class BudgetOverflowError(DomainError):
    """Composed delta reached 1, so the budget is meaningless."""


class NumericalError(GenPtrError, ArithmeticError):
    """A numerical routine failed (singular system, non-convergence, ...)."""


class InfeasibleCalibrationError(GenPtrError):
    """No noise parameter meets the requested privacy target."""
