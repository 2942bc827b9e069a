"""Exceptions raised by the numerical layers of flowopt.

Configuration problems are reported with Django's ``ImproperlyConfigured``;
everything below is about the numbers.
"""


class FlowOptError(Exception):
    """Base class for numerical failures.

    The optimizer attaches the iteration ``history`` recorded so far and a ``stage``
    label before letting the error propagate.
    """
    history = None
    stage = None


class MeshError(FlowOptError):
    """Invalid mesh geometry, out-of-range indices, or a field living on another mesh."""


class PhaseFieldError(FlowOptError):
    """A phase field violates the box [-1, 1] where an evaluation requires it."""


class BoundaryDataError(FlowOptError):
    """Dirichlet data missing for a tagged boundary segment."""


class SingularSystemError(FlowOptError):
    """A sparse factorization hit a zero pivot."""

    def __init__(self, message, dof=None):
        super().__init__(message)
        self.dof = dof


class ConvergenceError(FlowOptError):
    """The nonlinear state solver did not reach its tolerance."""

    def __init__(self, message, residual=None, picard_iters=0, newton_iters=0):
        super().__init__(message)
        self.residual = residual
        self.picard_iters = picard_iters
        self.newton_iters = newton_iters


class LineSearchError(FlowOptError):
    """Armijo backtracking ran out of trial steps."""

    def __init__(self, message, tau=None):
        super().__init__(message)
        self.tau = tau


class ProjectionError(FlowOptError):
    """The primal-dual active set projection failed to settle."""


class InfeasibleConstraintsError(ProjectionError):
    """No point of the box satisfies the integral constraints."""


class LevelSetError(FlowOptError):
    """The zero level set is empty or has positive measure."""
