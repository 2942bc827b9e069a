"""The reduced objective phi -> J(phi, S(phi)) and its adjoint gradient.

``ReducedProblem`` owns the objective terms, the constraint specs and the physical
parameters of one optimization stage. It caches recent state solves and warm-starts
new ones from the last state on the same mesh.
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from flowopt.adjoint import AdjointState, MultiplierState, reduced_gradient, solve_adjoint
from flowopt.fem.assembly import p1_mass, p1_stiffness
from flowopt.flow.state import FlowState, solve_state
from flowopt.functionals.base import FunctionalValue
from flowopt.functionals.constraints import linear_constraints

logger = logging.getLogger(__name__)

METRICS = ('h1_scaled', 'l2')
STATE_CACHE_SIZE = 4


@dataclass
class Evaluation:
    """Objective and constraint values at one phase field."""
    phi: object
    state: FlowState
    objective: FunctionalValue
    term_values: list = field(default_factory=list)
    constraint_values: list = field(default_factory=list)

    @property
    def value(self) -> float:
        return float(self.objective.value)


@dataclass
class Gradient:
    l2_part: np.ndarray
    grad_part: np.ndarray
    evaluation: Evaluation
    adjoint: AdjointState = None

    @property
    def dual(self) -> np.ndarray:
        return self.l2_part + self.grad_part


def metric_matrix(mesh, params, kind: str = 'h1_scaled'):
    """(gamma eps / (2 c0)) K + M for ``h1_scaled``, M for ``l2``."""
    if kind not in METRICS:
        raise ValueError(f'metric_matrix: unknown metric {kind!r}; expected one of {METRICS}')
    if kind == 'l2':
        return p1_mass(mesh)
    return (params.gl_scale * params.epsilon * p1_stiffness(mesh) + p1_mass(mesh)).tocsr()


class ReducedProblem:

    def __init__(self, terms, constraints, params, metric: str = 'h1_scaled'):
        if metric not in METRICS:
            raise ValueError(f'ReducedProblem: unknown metric {metric!r}; expected one of {METRICS}')
        self.terms = list(terms)
        self.constraints = list(constraints)
        self.params = params
        self.metric = metric
        self._states = OrderedDict()
        self.state_solves = 0

    def __repr__(self):
        return f'ReducedProblem(terms={self.terms}, constraints={self.constraints}, metric={self.metric})'

    def with_params(self, params) -> 'ReducedProblem':
        return ReducedProblem(self.terms, self.constraints, params, self.metric)

    @property
    def needs_state(self) -> bool:
        return (any(term.depends_on_state for term in self.terms)
                or any(not spec.enforce for spec in self.constraints))

    # -- state

    def solve(self, phi) -> FlowState:
        """State for ``phi``; repeated calls with the same nodal values reuse the solve."""
        if not self.needs_state:
            return None
        key = (id(phi.mesh), phi.values.tobytes())
        if key in self._states:
            self._states.move_to_end(key)
            return self._states[key]
        warm = next((s for (mesh_id, _), s in reversed(self._states.items()) if mesh_id == id(phi.mesh)), None)
        state = solve_state(phi, self.params, initial=warm)
        self.state_solves += 1
        self._states[key] = state
        while len(self._states) > STATE_CACHE_SIZE:
            self._states.popitem(last=False)
        return state

    # -- values

    def evaluate(self, phi) -> Evaluation:
        state = self.solve(phi)
        term_values = [term(phi, state, self.params) for term in self.terms]
        objective = FunctionalValue.zero(phi.mesh)
        for value in term_values:
            objective = objective + value
        constraint_values = [spec.evaluate(phi, state, self.params) for spec in self.constraints]
        return Evaluation(phi=phi, state=state, objective=objective, term_values=term_values,
                          constraint_values=constraint_values)

    def objective(self, phi) -> float:
        state = self.solve(phi)
        return float(sum(term(phi, state, self.params).value for term in self.terms))

    def gradient(self, phi, evaluation: Evaluation = None, multipliers: MultiplierState = None) -> Gradient:
        """Adjoint gradient of J, or of J - sum lambda_i G_i when ``multipliers`` is given."""
        evaluation = evaluation or self.evaluate(phi)
        constraint_values = evaluation.constraint_values if multipliers is not None else ()
        if evaluation.state is None:
            total = evaluation.objective
            if multipliers is not None:
                for value, lam in zip(constraint_values, multipliers.lambdas):
                    total = total + value.scaled(-lam)
            return Gradient(total.d_phi_l2.copy(), total.d_phi_grad.copy(), evaluation)
        adjoint = solve_adjoint(phi, evaluation.state, evaluation.objective, multipliers, constraint_values,
                                self.params)
        l2_part, grad_part = reduced_gradient(phi, evaluation.state, adjoint, evaluation.objective, multipliers,
                                              constraint_values, self.params)
        return Gradient(l2_part, grad_part, evaluation, adjoint)

    # -- geometry of the design space

    def linear_constraints(self, mesh) -> list:
        return linear_constraints(self.constraints, mesh)

    def metric_matrix(self, mesh):
        return metric_matrix(mesh, self.params, self.metric)
