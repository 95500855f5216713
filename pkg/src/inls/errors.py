"""Exception hierarchy.

Each exception carries the process exit code the command-line front end
maps it to: 2 for invalid input, 3 for solver non-convergence and 4 for
internal consistency failures.
"""


class InlsError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class ValidationError(InlsError, ValueError):
    """Input violates a documented precondition."""

    exit_code = 2


class NonConvergence(InlsError):
    """An iterative solver did not reach its tolerance."""

    exit_code = 3


class NoBracket(NonConvergence):
    """The shooting classifier never changed sign on the search interval."""


class AttainmentUnavailable(InlsError):
    """No maximiser exists for the weighted functional (V has no negative part)."""

    exit_code = 2


class ConsistencyError(InlsError):
    """Two independent evaluations of the same quantity disagree."""

    exit_code = 4


class BranchMismatch(ValidationError):
    """Ground state and threshold branch do not match."""


class ZeroField(ValidationError):
    """Operation undefined for the zero field."""


class IndefiniteKinetic(ValidationError):
    """The quadratic form of H = -Laplacian + V is not positive on the field."""


class MissingGroundState(ValidationError):
    """Classifier needs a ground state that was not supplied."""


class EmptyTrajectory(ValidationError):
    """Trajectory holds no records."""


class OutcomeMismatch(ValidationError):
    """Operation requires a trajectory with a different outcome."""
