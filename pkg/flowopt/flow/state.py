"""The Navier-Stokes-Brinkman state equation and its linearization.

Unknowns are ordered (velocity, pressure, mean-pressure multiplier). Velocity dofs
on the boundary are prescribed from the Dirichlet data; the multiplier row keeps the
pressure mean zero.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from flowopt.exceptions import ConvergenceError, PhaseFieldError
from flowopt.fem.assembly import assemble_oseen, assemble_vector_load, at_quadrature
from flowopt.fem.linalg import apply_dirichlet, sparse_solve
from flowopt.fem.quadrature import get_rule
from flowopt.fem.spaces import taylor_hood
from flowopt.flow.boundary import DirichletData, dirichlet_data
from flowopt.flow.params import PhysicalParams, alpha_eps, alpha_eps_derivative

logger = logging.getLogger(__name__)

PICARD_TOLERANCE = 1e-3
NEWTON_TOLERANCE = 1e-12
MAX_PICARD = 25
MAX_NEWTON = 25
CONTINUATION = (0.25, 0.5, 1.0)


class PhaseField:
    """Nodal P1 design variable on a mesh."""

    def __init__(self, mesh, values):
        self.mesh = mesh
        self.values = mesh.check_field(values, 'phase field').copy()
        self.values.flags.writeable = False

    def __repr__(self):
        return f'PhaseField(n={self.values.size}, min={self.values.min():.3f}, max={self.values.max():.3f})'

    def __len__(self):
        return self.values.size

    def with_values(self, values) -> 'PhaseField':
        return PhaseField(self.mesh, values)

    def check_box(self, tol: float = 1e-12):
        excess = np.abs(self.values).max() - 1.0 if self.values.size else 0.0
        if excess > tol:
            raise PhaseFieldError(f'PhaseField: nodal values leave [-1, 1] by {excess:.3e}')
        return self

    def at_quadrature(self, rule=None) -> np.ndarray:
        return taylor_hood(self.mesh).p1.evaluate(self.values, rule)

    def gradient(self, rule=None) -> np.ndarray:
        return taylor_hood(self.mesh).p1.gradient(self.values, rule)


@dataclass
class FlowState:
    """Discrete solution of the state equation for one phase field."""
    phi: PhaseField
    params: PhysicalParams
    vector: np.ndarray
    dirichlet: DirichletData
    newton_residual: float = math.nan
    picard_iters: int = 0
    newton_iters: int = 0
    continuation_steps: list = field(default_factory=list)

    @property
    def spaces(self):
        return taylor_hood(self.phi.mesh)

    @property
    def velocity(self) -> np.ndarray:
        return self.vector[:self.spaces.n_velocity]

    @property
    def pressure(self) -> np.ndarray:
        n_u = self.spaces.n_velocity
        return self.vector[n_u:n_u + self.spaces.n_pressure]

    @property
    def multiplier(self) -> float:
        return float(self.vector[-1])

    def velocity_at_vertices(self) -> np.ndarray:
        ux, uy = self.spaces.velocity.components(self.velocity)
        n = self.phi.mesh.n_vertices
        return np.column_stack([ux[:n], uy[:n]])


def brinkman_coefficient(phi: PhaseField, params: PhysicalParams, rule=None) -> np.ndarray:
    """alpha_eps of the interpolated phase field at quadrature points."""
    return alpha_eps(phi.at_quadrature(rule), params)


def body_force_load(spaces, params: PhysicalParams, rule=None) -> np.ndarray:
    if params.body_force is None:
        return np.zeros(spaces.n_velocity)
    points = spaces.velocity.geometry(rule)[1]
    return assemble_vector_load(spaces.velocity, params.force_at(points[..., 0], points[..., 1]), rule)


class _StateProblem:
    """Residual and Jacobians of the discrete state equation for fixed alpha."""

    def __init__(self, phi, params, alpha, bc):
        self.spaces = taylor_hood(phi.mesh)
        self.params = params
        self.alpha = alpha
        self.bc = bc
        n_u = self.spaces.n_velocity
        self.rhs = np.zeros(self.spaces.n_unknowns)
        self.rhs[:n_u] = body_force_load(self.spaces, params)
        self.free = np.ones(self.spaces.n_unknowns, dtype=bool)
        self.free[bc.dofs] = False

    def velocity(self, x):
        return x[:self.spaces.n_velocity]

    def operator(self, x, form):
        u = self.velocity(x)
        return assemble_oseen(self.spaces.velocity, self.spaces.pressure, self.params.mu, self.alpha,
                              advection=u, reaction_grad=u, form=form).matrix()

    def residual(self, x):
        F = self.operator(x, 'picard') @ x - self.rhs
        F[~self.free] = 0.0
        return F

    def picard_step(self, x):
        K, b = apply_dirichlet(self.operator(x, 'picard'), self.rhs, self.bc.dofs, self.bc.values)
        return sparse_solve(K, b)

    def newton_step(self, x, F):
        K, b = apply_dirichlet(self.operator(x, 'newton'), -F, self.bc.dofs, 0.0)
        return x + sparse_solve(K, b)


def _iterate(problem, x, max_picard, max_newton, picard_tol, newton_tol):
    F = problem.residual(x)
    res = np.abs(F).max()
    picard_iters = newton_iters = 0
    while res >= picard_tol and picard_iters < max_picard:
        x = problem.picard_step(x)
        picard_iters += 1
        F = problem.residual(x)
        res = np.abs(F).max()
        logger.debug(f'solve_state: Picard iteration {picard_iters} residual {res:.3e}')
    if not np.isfinite(res) or res >= picard_tol:
        raise ConvergenceError(f'solve_state: Picard stalled at residual {res:.3e}', residual=res,
                               picard_iters=picard_iters)

    while res > newton_tol and newton_iters < max_newton:
        x_new = problem.newton_step(x, F)
        step = np.abs(x_new - x).max()
        x = x_new
        newton_iters += 1
        F = problem.residual(x)
        res_new = np.abs(F).max()
        logger.debug(f'solve_state: Newton iteration {newton_iters} residual {res_new:.3e} step {step:.3e}')
        if not np.isfinite(res_new) or res_new > 1e3 * max(res, picard_tol):
            raise ConvergenceError(f'solve_state: Newton diverged, residual {res_new:.3e}', residual=res_new,
                                   picard_iters=picard_iters, newton_iters=newton_iters)
        res = res_new
        if step <= 1e-14 * max(1.0, np.abs(x).max()) and res <= 1e3 * newton_tol:
            break  # roundoff floor
    if res > 1e3 * newton_tol or (res > newton_tol and newton_iters >= max_newton):
        raise ConvergenceError(f'solve_state: Newton stopped at residual {res:.3e} after {newton_iters} iterations',
                               residual=res, picard_iters=picard_iters, newton_iters=newton_iters)
    return x, res, picard_iters, newton_iters


def solve_state(phi: PhaseField, params: PhysicalParams, initial=None, *,
                max_picard: int = MAX_PICARD, max_newton: int = MAX_NEWTON,
                picard_tol: float = PICARD_TOLERANCE, newton_tol: float = NEWTON_TOLERANCE) -> FlowState:
    """Solve the stationary Navier-Stokes-Brinkman system for ``phi``.

    Picard iterations bring the residual below ``picard_tol``, Newton finishes to
    ``newton_tol``. If that fails the Brinkman strength is ramped up in geometric steps,
    each solve warm-starting the next. ``initial`` (a FlowState or full vector on the same
    mesh) warm-starts the first attempt.
    """
    spaces = taylor_hood(phi.mesh)
    bc = dirichlet_data(spaces.velocity, params.boundary_data, params.rescale_outflow)
    alpha = brinkman_coefficient(phi, params)

    x0 = np.zeros(spaces.n_unknowns)
    if isinstance(initial, FlowState):
        initial = initial.vector
    if initial is not None and len(initial) == spaces.n_unknowns:
        x0 = np.array(initial, dtype=float)
    x0[bc.dofs] = bc.values

    steps = []
    try:
        x, res, n_picard, n_newton = _iterate(_StateProblem(phi, params, alpha, bc), x0,
                                              max_picard, max_newton, picard_tol, newton_tol)
    except ConvergenceError as err:
        logger.warning(f'solve_state: {err}; continuing in alpha_bar over {CONTINUATION}')
        x = np.zeros(spaces.n_unknowns)
        x[bc.dofs] = bc.values
        n_picard = n_newton = 0
        for factor in CONTINUATION:
            x, res, p_it, n_it = _iterate(_StateProblem(phi, params, factor * alpha, bc), x,
                                          max_picard, max_newton, picard_tol, newton_tol)
            n_picard += p_it
            n_newton += n_it
            steps.append(factor)
            logger.info(f'solve_state: continuation step alpha_bar x {factor} residual {res:.3e}')

    state = FlowState(phi=phi, params=params, vector=x, dirichlet=bc, newton_residual=float(res),
                      picard_iters=n_picard, newton_iters=n_newton, continuation_steps=steps)
    logger.debug(f'solve_state: converged with residual {res:.3e} '
                 f'({n_picard} Picard, {n_newton} Newton iterations)')
    return state


def state_jacobian(state: FlowState):
    """Newton Jacobian of the state residual at ``state`` (before boundary elimination)."""
    spaces = state.spaces
    u = state.velocity
    return assemble_oseen(spaces.velocity, spaces.pressure, state.params.mu,
                          brinkman_coefficient(state.phi, state.params),
                          advection=u, reaction_grad=u, form='newton').matrix()


def brinkman_sensitivity(state: FlowState, direction, rule=None) -> np.ndarray:
    """Dual vector (alpha_eps'(phi) delta u, v): derivative of the residual along ``direction``."""
    rule = rule or get_rule()
    spaces = state.spaces
    delta = at_quadrature(spaces.p1, np.asarray(direction, dtype=float), rule)
    dalpha = alpha_eps_derivative(state.phi.at_quadrature(rule), state.params)
    u = spaces.velocity.evaluate(state.velocity, rule)
    return assemble_vector_load(spaces.velocity, (dalpha * delta)[..., None] * u, rule)


def velocity_gradient_norm(state: FlowState, rule=None) -> float:
    rule = rule or get_rule()
    W = state.spaces.velocity.geometry(rule)[0]
    grad = state.spaces.velocity.gradient(state.velocity, rule)
    return float(np.sqrt(np.sum(W * np.sum(grad ** 2, axis=(-1, -2)))))


def uniqueness_constant(domain_area: float, dim: int = 2) -> float:
    if dim == 2:
        return 0.5 * domain_area ** 0.5
    if dim == 3:
        return (2.0 * math.sqrt(2.0) / 3.0) * domain_area ** (1.0 / 6.0)
    raise ValueError(f'uniqueness_constant: dimension must be 2 or 3, got {dim}')


def check_uniqueness_bound(state: FlowState, params: PhysicalParams, domain_area: float, dim: int = 2) -> dict:
    """K_Omega, ||grad u||_L2 and whether ||grad u|| < mu / K_Omega."""
    bound = uniqueness_constant(domain_area, dim)
    norm = velocity_gradient_norm(state) if state is not None else 0.0
    satisfied = bool(norm < params.mu / bound)
    if not satisfied:
        logger.warning(f'check_uniqueness_bound: ||grad u|| = {norm:.4e} exceeds mu / K = {params.mu / bound:.4e}')
    return {'bound': bound, 'norm': norm, 'threshold': params.mu / bound, 'satisfied': satisfied}


def solve_linearized_state(phi: PhaseField, delta, state: FlowState, params: PhysicalParams = None):
    """Directional derivative (w, r) of the state along ``delta``.

    Solves the Newton system at ``state`` with source -alpha_eps'(phi) delta u and
    homogeneous boundary data.
    """
    params = params or state.params
    report = check_uniqueness_bound(state, params, phi.mesh.area)
    if not report['satisfied']:
        logger.warning('solve_linearized_state: uniqueness bound violated, the linearization may be singular')
    spaces = state.spaces
    rhs = np.zeros(spaces.n_unknowns)
    rhs[:spaces.n_velocity] = -brinkman_sensitivity(state, phi.mesh.check_field(delta, 'direction'))
    K, b = apply_dirichlet(state_jacobian(state), rhs, state.dirichlet.dofs, 0.0)
    sol = sparse_solve(K, b)
    n_u = spaces.n_velocity
    return sol[:n_u], sol[n_u:n_u + spaces.n_pressure]
