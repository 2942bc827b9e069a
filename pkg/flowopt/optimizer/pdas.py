"""Metric projection onto the box [-1, 1]^n intersected with linear integral constraints.

The box is handled by a primal-dual active set iteration: nodes are guessed upper
or lower active from zeta + xi / diag(M), the remaining nodes and the multipliers
of the equality constraints are solved for in one bordered system, and the guess is
corrected until it repeats. Nodes enter and leave the active sets with a small
hysteresis around the bounds; if a set comes back, the iteration only adds nodes. Inequality constraints are handled by an outer working
set loop that activates violated constraints and drops those with negative
multipliers.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from flowopt.adjoint import MultiplierState
from flowopt.exceptions import InfeasibleConstraintsError, ProjectionError, SingularSystemError
from flowopt.fem.linalg import sparse_solve

logger = logging.getLogger(__name__)

MAX_ACTIVE_SET_ITERATIONS = 100
MAX_WORKING_SET_ITERATIONS = 50
FEASIBILITY_TOLERANCE = 1e-10
BOUND_TOLERANCE = 1e-10
KKT_TOLERANCE = 1e-10


@dataclass
class ProjectionResult:
    values: np.ndarray
    multipliers: MultiplierState
    box_multipliers: np.ndarray
    active_lower: np.ndarray
    active_upper: np.ndarray
    iterations: int
    kkt_residual: float

    @property
    def inactive_fraction(self) -> float:
        n = self.values.size
        return float(n - self.active_lower.sum() - self.active_upper.sum()) / n if n else 0.0


def check_feasible(constraints):
    """Reject constraints no point of the box can satisfy."""
    for c in constraints:
        reach = float(np.abs(c.weights).sum())
        if c.relation == 'equality' and abs(c.target) > reach * (1.0 + 1e-12):
            raise InfeasibleConstraintsError(f'pdas_project: {c.name} needs weights . zeta = {c.target:.6e}, '
                                             f'but the box only reaches +-{reach:.6e}')
        if c.relation == 'inequality' and c.target > reach * (1.0 + 1e-12):
            raise InfeasibleConstraintsError(f'pdas_project: {c.name} needs weights . zeta >= {c.target:.6e}, '
                                             f'but the box only reaches {reach:.6e}')


def _solve_box(candidate, metric, diagonal, constraints, working):
    """PDAS for the box with the constraints in ``working`` held as equalities."""
    n = candidate.size
    W = np.array([constraints[i].weights for i in working]).reshape(len(working), n)
    t = np.array([constraints[i].target for i in working])
    Mc = metric @ candidate

    upper = candidate > 1.0 + BOUND_TOLERANCE
    lower = candidate < -1.0 - BOUND_TOLERANCE
    seen = set()
    growing = False
    for iteration in range(1, MAX_ACTIVE_SET_ITERATIONS + 1):
        inactive = ~(upper | lower)
        zeta = np.zeros(n)
        zeta[upper] = 1.0
        zeta[lower] = -1.0
        I = np.flatnonzero(inactive)
        if I.size == 0 and working:
            raise ProjectionError('pdas_project: every node is box-active; the constraints cannot be enforced')

        rhs_top = Mc[I] - metric[I][:, ~inactive] @ zeta[~inactive]
        rhs_bottom = t - W[:, ~inactive] @ zeta[~inactive]
        if I.size:
            M_II = metric[I][:, I]
            if working:
                W_I = sparse.csr_matrix(W[:, I])
                system = sparse.bmat([[M_II, W_I.T], [W_I, None]], format='csr')
                rhs = np.concatenate([rhs_top, rhs_bottom])
            else:
                system, rhs = M_II, rhs_top
            try:
                solution = sparse_solve(system, rhs)
            except SingularSystemError as err:
                raise ProjectionError(f'pdas_project: bordered system is singular ({err})') from err
            raw = solution[:I.size]
            # overshoot within the tolerance is roundoff; larger overshoot activates the node below
            zeta[I] = np.where(np.abs(raw) <= 1.0 + BOUND_TOLERANCE, np.clip(raw, -1.0, 1.0), raw)
            nu = solution[I.size:]
        else:
            nu = np.zeros(0)
        mu = -nu

        xi = -(metric @ (zeta - candidate)) + W.T @ mu
        xi[inactive] = 0.0
        trial = zeta + xi / diagonal
        # a node enters the active set past 1 + tol and leaves it below 1 - tol
        new_upper = np.where(upper, trial >= 1.0 - BOUND_TOLERANCE, trial > 1.0 + BOUND_TOLERANCE)
        new_lower = np.where(lower, trial <= -1.0 + BOUND_TOLERANCE, trial < -1.0 - BOUND_TOLERANCE)
        if growing:
            new_upper, new_lower = new_upper | upper, new_lower | lower
            new_lower &= ~new_upper
        if np.array_equal(new_upper, upper) and np.array_equal(new_lower, lower):
            return zeta, mu, xi, lower, upper, iteration
        key = (new_upper.tobytes(), new_lower.tobytes())
        if key in seen and not growing:
            logger.debug(f'pdas_project: active set cycles after {iteration} iterations; only adding nodes from now on')
            growing = True
            new_upper, new_lower = new_upper | upper, (new_lower | lower) & ~(new_upper | upper)
        seen.add((upper.tobytes(), lower.tobytes()))
        upper, lower = new_upper, new_lower
    raise ProjectionError(f'pdas_project: active set did not settle in {MAX_ACTIVE_SET_ITERATIONS} iterations')


def _kkt_residual(candidate, metric, constraints, zeta, mu_all, xi):
    W = np.array([c.weights for c in constraints]).reshape(len(constraints), candidate.size)
    stationarity = metric @ (zeta - candidate) + xi - W.T @ mu_all
    scale = max(1.0, float(np.abs(metric @ candidate).max(initial=0.0)))
    feasibility = 0.0
    for c, mu in zip(constraints, mu_all):
        g = c.residual(zeta)
        feasibility = max(feasibility, abs(g) if c.relation == 'equality' else max(-g, 0.0, abs(mu * g)))
    return max(float(np.abs(stationarity).max(initial=0.0)) / scale, feasibility / scale)


def pdas_project(candidate, metric, constraints=()) -> ProjectionResult:
    """argmin 1/2 |zeta - candidate|^2_metric over the box and the linear constraints.

    Constraint multipliers mu follow the convention M (zeta - c) + xi = W^T mu, so
    mu >= 0 for active inequalities and xi > 0 on upper-active nodes.
    """
    candidate = np.asarray(candidate, dtype=float)
    metric = sparse.csr_matrix(metric)
    constraints = list(constraints)
    check_feasible(constraints)
    diagonal = metric.diagonal()
    if np.any(diagonal <= 0.0):
        raise ProjectionError('pdas_project: the metric is not positive definite')

    equalities = [i for i, c in enumerate(constraints) if c.relation == 'equality']
    inequalities = [i for i, c in enumerate(constraints) if c.relation == 'inequality']
    working = []
    for _ in range(MAX_WORKING_SET_ITERATIONS):
        held = equalities + working
        zeta, mu, xi, lower, upper, iterations = _solve_box(candidate, metric, diagonal, constraints, held)
        mu_all = np.zeros(len(constraints))
        mu_all[held] = mu

        negative = [i for i in working if mu_all[i] < 0.0]
        if negative:
            drop = min(negative, key=lambda i: (mu_all[i], i))
            working.remove(drop)
            logger.debug(f'pdas_project: releasing {constraints[drop].name} (multiplier {mu_all[drop]:.3e})')
            continue
        violated = [i for i in inequalities if i not in working
                    and constraints[i].residual(zeta) < -FEASIBILITY_TOLERANCE * max(1.0, abs(constraints[i].target))]
        if violated:
            add = min(violated, key=lambda i: (constraints[i].residual(zeta), i))
            working.append(add)
            logger.debug(f'pdas_project: activating {constraints[add].name}')
            continue
        break
    else:
        raise ProjectionError(f'pdas_project: working set did not settle in {MAX_WORKING_SET_ITERATIONS} rounds')

    residual = _kkt_residual(candidate, metric, constraints, zeta, mu_all, xi)
    if residual > KKT_TOLERANCE:
        raise ProjectionError(f'pdas_project: KKT residual {residual:.3e} exceeds {KKT_TOLERANCE:.0e}')

    active = np.zeros(len(constraints), dtype=bool)
    active[equalities + working] = True
    multipliers = MultiplierState(names=[c.name or f'constraint_{i}' for i, c in enumerate(constraints)],
                                  lambdas=mu_all, active_flags=active, slackness=np.zeros(len(constraints)))
    multipliers = multipliers.with_values(constraints, [c.residual(zeta) for c in constraints])
    logger.debug(f'pdas_project: {iterations} active set iterations, {int(lower.sum())} lower / '
                 f'{int(upper.sum())} upper active nodes, KKT residual {residual:.2e}')
    return ProjectionResult(values=zeta, multipliers=multipliers, box_multipliers=xi, active_lower=lower,
                            active_upper=upper, iterations=iterations, kkt_residual=residual)
