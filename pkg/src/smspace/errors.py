"""Exception types shared across the package."""


class SmspaceError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SmspaceError, ValueError):
    """An input violates a documented precondition (e.g. motor value outside [-1, 1])."""


class FormatError(SmspaceError, ValueError):
    """A binary file does not match its declared layout; message names the byte offset."""


class DegenerateInputError(SmspaceError, ValueError):
    """A computation is undefined for this input (rank-deficient regression, zero spread)."""


class InfeasibleTargetError(SmspaceError, ValueError):
    """A requested displacement or position lies outside the arm's reachable set."""


class ConvergenceError(SmspaceError, RuntimeError):
    """An iterative solver exhausted its restart budget without meeting tolerance."""


class TrainingFault(SmspaceError, RuntimeError):
    """Training produced non-finite values; message carries epoch/batch context."""
