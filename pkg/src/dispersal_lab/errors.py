class DomainError(ValueError):
    """Argument outside the domain of a function."""


class PreconditionError(ValueError):
    """A theorem hypothesis required by the requested quantity does not hold."""


class ConvergenceError(ArithmeticError):
    """An iterative solver did not converge within its budget."""
