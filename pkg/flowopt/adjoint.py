"""Adjoint state, pressure-constraint multiplier and the reduced gradient.

The Lagrangian is L = J - sum_i lambda_i G_i with lambda_i >= 0 for inequalities.
The adjoint system is the transpose of the discrete Newton Jacobian of the state
equation, with homogeneous Dirichlet rows; its right-hand side collects the state
derivatives of J and of the constraints. The pressure derivatives land on the
continuity rows, so q is not divergence free: div q equals that data shifted by
theta to mean zero.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from flowopt.fem.assembly import assemble_load
from flowopt.fem.linalg import apply_dirichlet, sparse_solve
from flowopt.flow.params import alpha_eps_derivative
from flowopt.flow.state import check_uniqueness_bound, state_jacobian

logger = logging.getLogger(__name__)


@dataclass
class AdjointState:
    q: np.ndarray
    pi: np.ndarray
    theta: float


@dataclass
class MultiplierState:
    """Constraint multipliers in the order of the constraint list.

    ``slackness`` holds lambda_i G_i for the inequalities and 0 for the equalities.
    """
    names: list
    lambdas: np.ndarray
    active_flags: np.ndarray
    slackness: np.ndarray = field(default=None)

    @classmethod
    def zero(cls, specs) -> 'MultiplierState':
        n = len(specs)
        return cls(names=[spec.name for spec in specs], lambdas=np.zeros(n), active_flags=np.zeros(n, dtype=bool),
                   slackness=np.zeros(n))

    def with_values(self, specs, values) -> 'MultiplierState':
        """Record lambda_i G_i for the given constraint values."""
        slack = np.array([lam * g if spec.relation == 'inequality' else 0.0
                          for spec, lam, g in zip(specs, self.lambdas, values)])
        return MultiplierState(names=list(self.names), lambdas=self.lambdas.copy(),
                               active_flags=self.active_flags.copy(), slackness=slack)

    def as_dict(self) -> dict:
        return {name: float(lam) for name, lam in zip(self.names, self.lambdas)}


def lagrangian_value(objective, constraint_values=(), lambdas=()):
    """J - sum_i lambda_i G_i as a FunctionalValue."""
    total = objective
    for value, lam in zip(constraint_values, lambdas):
        if lam != 0.0:
            total = total + value.scaled(-lam)
    return total


def compute_theta(divergence_data, domain_area: float) -> float:
    """theta = -|Omega|^-1 times the integral of the pressure derivative data.

    ``divergence_data`` is the assembled pressure derivative (d, psi_i) of the Lagrangian.
    """
    return -float(np.sum(divergence_data)) / domain_area


def mean_free_divergence_data(divergence_data, mean_row, theta: float) -> np.ndarray:
    """(g, psi_i) = data_i + theta (1, psi_i); integrates to zero for the theta above."""
    return np.asarray(divergence_data, dtype=float) + theta * np.asarray(mean_row, dtype=float)


def solve_adjoint(phi, state, objective, multipliers: MultiplierState = None, constraint_values=(),
                  params=None) -> AdjointState:
    """Solve J_x^T (q, pi, m) = d_x L with q = 0 on the Dirichlet boundary; theta = -m."""
    params = params or state.params
    lambdas = multipliers.lambdas if multipliers is not None else ()
    lagrangian = lagrangian_value(objective, constraint_values, lambdas)
    report = check_uniqueness_bound(state, params, phi.mesh.area)
    if not report['satisfied']:
        logger.warning('solve_adjoint: uniqueness bound violated; the adjoint system may be ill-posed')

    spaces = state.spaces
    rhs = lagrangian.d_state
    jacobian_t = state_jacobian(state).T.tocsr()
    K, b = apply_dirichlet(jacobian_t, rhs, state.dirichlet.dofs, 0.0)
    solution = sparse_solve(K, b)

    n_u, n_p = spaces.n_velocity, spaces.n_pressure
    theta = -float(solution[-1])
    expected = compute_theta(lagrangian.d_pressure, phi.mesh.area)
    logger.debug(f'solve_adjoint: theta {theta:.6e} (from the data {expected:.6e})')
    return AdjointState(q=solution[:n_u], pi=solution[n_u:n_u + n_p], theta=theta)


def reduced_gradient(phi, state, adjoint: AdjointState, objective, multipliers: MultiplierState = None,
                     constraint_values=(), params=None):
    """(L2 part, gradient part) of the derivative of the reduced Lagrangian, as dual vectors.

    The L2 part adds -(alpha_eps'(phi) u . q, psi_i) to the phi-derivatives of the
    objective and constraint terms.
    """
    params = params or state.params
    lambdas = multipliers.lambdas if multipliers is not None else ()
    lagrangian = lagrangian_value(objective, constraint_values, lambdas)

    spaces = state.spaces
    dalpha = alpha_eps_derivative(phi.at_quadrature(), params)
    u = spaces.velocity.evaluate(state.velocity)
    q = spaces.velocity.evaluate(adjoint.q)
    coupling = assemble_load(spaces.p1, dalpha * np.einsum('tqd,tqd->tq', u, q))
    return lagrangian.d_phi_l2 - coupling, lagrangian.d_phi_grad.copy()
