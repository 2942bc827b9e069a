"""The outer optimization loop: descent stages in epsilon, adaptive refinement inside each stage.

Within a stage the projected descent runs to stationarity on the current mesh. The
mesh is then refined with the phase-field jump indicator until its vertex count
reaches the stage's budget. The next stage halves epsilon (or takes the next value
of the configured schedule) and grows the budget.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from django.core.exceptions import ImproperlyConfigured

from flowopt.exceptions import FlowOptError, InfeasibleConstraintsError, ProjectionError
from flowopt.fem.indicators import DOERFLER_FRACTION, doerfler_mark, phase_jump_indicator
from flowopt.fem.mesh import generate_rectangle_mesh, prolongate, refine_marked, uniform_refine
from flowopt.flow.state import PhaseField
from flowopt.initial import initial_phase_field
from flowopt.optimizer.pdas import pdas_project
from flowopt.optimizer.vmpt import ArmijoConfig, IterationRecord, vmpt_step
from flowopt.reduced import METRICS, ReducedProblem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    metric: str = 'h1_scaled'
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)
    step_tolerance: float = 1e-6
    slackness_tolerance: float = 1e-8
    max_outer_iters: int = 200
    inactive_fraction_floor: float = 0.02
    max_dofs: int = 8000
    # empty: a single stage at the epsilon of the physical parameters
    epsilon_schedule: tuple = ()
    dof_growth: float = 1.2
    doerfler_fraction: float = DOERFLER_FRACTION
    max_forced_refinements: int = 3

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ImproperlyConfigured(f'OptimizerConfig: METRIC must be one of {METRICS}, got {self.metric!r}')
        if not 0.0 < self.inactive_fraction_floor < 1.0:
            raise ImproperlyConfigured('OptimizerConfig: INACTIVE_FRACTION_FLOOR must lie in (0, 1)')
        if not 0.0 < self.doerfler_fraction <= 1.0:
            raise ImproperlyConfigured('OptimizerConfig: DOERFLER_FRACTION must lie in (0, 1]')
        if self.step_tolerance <= 0 or self.slackness_tolerance <= 0:
            raise ImproperlyConfigured('OptimizerConfig: tolerances must be positive')
        if self.max_outer_iters < 1 or self.max_dofs < 1:
            raise ImproperlyConfigured('OptimizerConfig: MAX_OUTER_ITERS and MAX_DOFS must be positive')
        if self.dof_growth < 1.0:
            raise ImproperlyConfigured(f'OptimizerConfig: DOF_GROWTH must be at least 1, got {self.dof_growth}')
        if any(not eps > 0 for eps in self.epsilon_schedule):
            raise ImproperlyConfigured(f'OptimizerConfig: EPSILON_SCHEDULE must be positive, got {self.epsilon_schedule}')

    @classmethod
    def from_options(cls, options: dict) -> 'OptimizerConfig':
        """Build from the OPTIMIZER section of a problem document (upper-case keys)."""
        options = {k.lower(): v for k, v in (options or {}).items()}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(options) - known
        if unknown:
            raise ImproperlyConfigured(f'OptimizerConfig: unknown OPTIMIZER keys {sorted(k.upper() for k in unknown)}')
        if 'armijo' in options:
            try:
                options['armijo'] = ArmijoConfig(**{k.lower(): v for k, v in options['armijo'].items()})
            except (TypeError, ValueError) as err:
                raise ImproperlyConfigured(f'OptimizerConfig: bad ARMIJO section: {err}')
        if 'epsilon_schedule' in options:
            options['epsilon_schedule'] = tuple(float(eps) for eps in options['epsilon_schedule'])
        return cls(**options)

    def with_max_dofs(self, max_dofs: int) -> 'OptimizerConfig':
        return replace(self, max_dofs=int(max_dofs))


@dataclass
class OptimizationResult:
    phi: PhaseField
    state: object
    multipliers: object
    history: list
    evaluation: object
    problem: ReducedProblem
    monitored: dict = field(default_factory=dict)
    converged: bool = False

    @property
    def final_record(self) -> IterationRecord:
        return self.history[-1]


class _Notifier:
    """Forwards loop events to an optional observer ``observer(event, **payload)``."""

    def __init__(self, observer):
        self.observer = observer

    def __call__(self, event, **payload):
        if self.observer is not None:
            self.observer(event, **payload)


def _monitored_values(problem, evaluation) -> dict:
    return {spec.name: float(value.value) for spec, value in zip(problem.constraints, evaluation.constraint_values)
            if not spec.enforce}


def _project(problem, phi):
    """Project phi onto the box and the enforced constraints on its own mesh."""
    metric = problem.metric_matrix(phi.mesh)
    projection = pdas_project(phi.values, metric, problem.linear_constraints(phi.mesh))
    return phi.with_values(projection.values), projection


def _refine(mesh, phi, fraction):
    marked = doerfler_mark(phase_jump_indicator(mesh, phi), fraction)
    if marked.size == 0:
        logger.info('_refine: phase field has no jumps; refining uniformly')
        fine = uniform_refine(mesh)
    else:
        fine = refine_marked(mesh, marked)
    return PhaseField(fine, prolongate(fine, phi.values))


def _slackness(multipliers) -> float:
    if multipliers is None or multipliers.slackness is None or not len(multipliers.slackness):
        return 0.0
    return float(np.max(np.abs(multipliers.slackness)))


def optimize(spec, observer=None) -> OptimizationResult:
    """Run the stage loop for a validated ProblemSpec.

    ``observer(event, **payload)`` is called with ``'iteration'`` (record, phi,
    evaluation), ``'refine'`` (mesh, reason) and ``'stage'`` (stage, epsilon, budget)
    events. Solver and line-search failures propagate with ``history`` and ``stage``
    attached to the exception.
    """
    config = spec.optimizer
    notify = _Notifier(observer)
    epsilons = config.epsilon_schedule or (spec.params.epsilon,)
    history = []
    stage_label = 'initialization'

    try:
        mesh = generate_rectangle_mesh(spec.width, spec.height, spec.nx, spec.ny)
        problem = ReducedProblem(spec.terms, spec.constraints, spec.params.with_epsilon(epsilons[0]), config.metric)
        phi = initial_phase_field(spec.initial, mesh, epsilons[0])
        phi, projection = _project(problem, phi)
        evaluation = problem.evaluate(phi)
        record = IterationRecord(iteration=0, objective=evaluation.value,
                                 constraints={c.name: c.residual(phi.values)
                                              for c in problem.linear_constraints(mesh)},
                                 dofs=mesh.n_vertices, inactive_fraction=projection.inactive_fraction,
                                 stage=0, epsilon=epsilons[0])
        record.constraints.update(_monitored_values(problem, evaluation))
        history.append(record)
        notify('iteration', record=record, phi=phi, evaluation=evaluation, problem=problem)

        budget = config.max_dofs
        multipliers = projection.multipliers
        converged = False
        for stage, epsilon in enumerate(epsilons):
            stage_label = f'stage {stage} (epsilon={epsilon:g})'
            if stage:
                problem = problem.with_params(problem.params.with_epsilon(epsilon))
                phi, projection = _project(problem, phi)
                evaluation = problem.evaluate(phi)
            logger.info(f'optimize: {stage_label}, dof budget {budget}, starting from {phi.mesh}')
            notify('stage', stage=stage, epsilon=epsilon, budget=budget)
            phi, evaluation, multipliers, converged = _run_stage(problem, phi, evaluation, multipliers, config, budget,
                                                                 stage, epsilon, history, notify)
            budget = int(math.ceil(budget * config.dof_growth))
    except FlowOptError as err:
        err.history = history
        err.stage = stage_label
        logger.error(f'optimize: {err.__class__.__name__} in {stage_label} after {len(history)} records: {err}')
        raise

    slack = _slackness(multipliers)
    if slack > config.slackness_tolerance:
        logger.warning(f'optimize: complementary slackness {slack:.3e} above {config.slackness_tolerance:.0e}')
        converged = False
    logger.info(f'optimize: finished with J = {evaluation.value:.9e} on {phi.mesh} after {len(history) - 1} steps '
                f'({problem.state_solves} state solves in the last stage)')
    return OptimizationResult(phi=phi, state=evaluation.state, multipliers=multipliers, history=history,
                              evaluation=evaluation, problem=problem,
                              monitored=_monitored_values(problem, evaluation), converged=converged)


def _run_stage(problem, phi, evaluation, multipliers, config, budget, stage, epsilon, history, notify):
    """Descend to stationarity, refining until the vertex count reaches ``budget``."""
    forced = 0
    steps = 0
    while True:
        stationary = False
        refine_reason = None
        while steps < config.max_outer_iters:
            mesh = phi.mesh
            metric = problem.metric_matrix(mesh)
            constraints = problem.linear_constraints(mesh)
            gradient = problem.gradient(phi, evaluation)
            try:
                result = vmpt_step(phi, gradient.dual, metric, constraints, problem.objective, config.armijo,
                                   current_value=evaluation.value, iteration=len(history),
                                   stationary_tolerance=config.step_tolerance)
            except InfeasibleConstraintsError:
                raise
            except ProjectionError as err:
                if forced >= config.max_forced_refinements or mesh.n_vertices >= budget:
                    raise
                logger.warning(f'_run_stage: {err}; refining before retrying')
                refine_reason = 'projection'
                break
            steps += 1
            multipliers = result.multipliers
            phi = result.phi
            evaluation = problem.evaluate(phi)
            record = result.record
            record.stage, record.epsilon = stage, epsilon
            record.constraints.update(_monitored_values(problem, evaluation))
            history.append(record)
            notify('iteration', record=record, phi=phi, evaluation=evaluation, problem=problem)
            logger.info(f'_run_stage: iteration {record.iteration} J = {record.objective:.9e} tau = {record.tau:.2e} '
                        f'|step| = {record.step_norm:.2e} inactive {record.inactive_fraction:.3f}')
            if result.stationary:
                stationary = True
                forced = 0
                break
            if (result.projection.inactive_fraction < config.inactive_fraction_floor
                    and forced < config.max_forced_refinements and mesh.n_vertices < budget):
                logger.warning(f'_run_stage: inactive fraction {result.projection.inactive_fraction:.4f} below '
                               f'{config.inactive_fraction_floor}; refining the interface')
                refine_reason = 'inactive_fraction'
                break
        else:
            logger.warning(f'_run_stage: stage {stage} reached {config.max_outer_iters} iterations without '
                           f'stationarity')

        if refine_reason is None and (not stationary or phi.mesh.n_vertices >= budget):
            return phi, evaluation, multipliers, stationary
        if refine_reason is not None:
            forced += 1
        else:
            refine_reason = 'stationary'
        phi = _refine(phi.mesh, phi, config.doerfler_fraction)
        phi, projection = _project(problem, phi)
        evaluation = problem.evaluate(phi)
        logger.info(f'_run_stage: refined after {refine_reason} to {phi.mesh}')
        notify('refine', mesh=phi.mesh, reason=refine_reason)
