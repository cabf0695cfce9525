"""Exception types shared across the package."""


class KsolError(Exception):
    """Base class for all package errors."""


class DomainError(KsolError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ParameterError(KsolError, ValueError):
    """Soliton parameters violate a structural precondition."""


class NotApplicableError(KsolError):
    """The requested quantity does not exist in this parameter regime."""


class ConvergenceError(KsolError, RuntimeError):
    """An iterative construction failed to converge within its budget."""
