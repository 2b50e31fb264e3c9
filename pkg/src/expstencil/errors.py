"""Exception types shared across the package."""


class ExpStencilError(Exception):
    """Base class for package-specific errors."""


class EvaluationError(ExpStencilError):
    """A user-supplied scalar function produced a non-finite value."""


class GridMismatchError(ExpStencilError):
    """Operands are bound to different grids or have incompatible shapes."""


class BoundaryKindError(ExpStencilError):
    """Operation is not defined for the operator's boundary condition kind."""


class ConvergenceError(ExpStencilError):
    """Newton series did not converge within the degree budget."""

    def __init__(self, message, residual=None, degree=None):
        super().__init__(message)
        self.residual = residual
        self.degree = degree


class DomainError(ExpStencilError):
    """A nonlinearity was evaluated outside its domain."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class MatrixMarketError(ExpStencilError):
    """Malformed Matrix Market file; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ExpressionError(ExpStencilError):
    """Parse failure in the boundary/initial-condition expression language."""


class ConfigError(ExpStencilError):
    """Invalid run configuration (CLI exit code 1)."""
