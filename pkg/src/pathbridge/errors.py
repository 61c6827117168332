"""Exception hierarchy shared by the classical and quantum modules."""


class PathBridgeError(Exception):
    """Base class for all package errors."""


class ModelError(PathBridgeError, ValueError):
    """A model violates a structural invariant (shape, stochasticity, trace)."""


class DomainError(PathBridgeError, ValueError):
    """An argument lies outside the domain of the operation."""


class InfeasibleError(PathBridgeError):
    """The constrained problem has no solution on the declared supports."""

    def __init__(self, message, cost=float("inf")):
        super().__init__(message)
        self.cost = cost


class ConvergenceError(PathBridgeError):
    """An iterative solver hit its iteration budget."""

    def __init__(self, message, iterations, residual):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SizeGuardError(PathBridgeError):
    """Exhaustive enumeration would exceed the configured size guard."""


class ParseError(ModelError):
    """An input document does not match its schema; ``pointer`` locates the problem."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class ConditioningError(DomainError):
    """Conditioning on an event of zero probability."""


class PreconditionError(DomainError):
    """A documented precondition of the operation does not hold."""


class GenerationError(PathBridgeError):
    """Random competitor generation failed after the allowed retries."""
