"""Variable metric projected descent step with Armijo backtracking."""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from flowopt.adjoint import MultiplierState
from flowopt.exceptions import ConvergenceError, LineSearchError
from flowopt.fem.linalg import sparse_solve
from flowopt.optimizer.pdas import ProjectionResult, pdas_project

logger = logging.getLogger(__name__)

STATIONARY_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ArmijoConfig:
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 30

    def __post_init__(self):
        if not self.initial_step > 0:
            raise ValueError(f'ArmijoConfig: initial_step must be positive, got {self.initial_step}')
        if not 0.0 < self.shrink < 1.0:
            raise ValueError(f'ArmijoConfig: shrink must lie in (0, 1), got {self.shrink}')
        if not 0.0 < self.sufficient_decrease < 1.0:
            raise ValueError(f'ArmijoConfig: sufficient_decrease must lie in (0, 1), got {self.sufficient_decrease}')
        if self.max_backtracks < 0:
            raise ValueError('ArmijoConfig: max_backtracks must be nonnegative')


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    constraints: dict = field(default_factory=dict)
    multipliers: dict = field(default_factory=dict)
    tau: float = math.nan
    step_norm: float = 0.0
    dofs: int = 0
    active_nodes: int = 0
    inactive_fraction: float = 1.0
    stage: int = 0
    epsilon: float = math.nan
    stationary: bool = False
    backtracks: int = 0

    def as_row(self) -> dict:
        """Flat dict for the CSV history: constraint residuals as G_<name>, multipliers as lambda_<name>."""
        row = {k: v for k, v in asdict(self).items() if k not in ('constraints', 'multipliers')}
        row['J'] = row.pop('objective')
        row.update({f'G_{name}': value for name, value in self.constraints.items()})
        row.update({f'lambda_{name}': value for name, value in self.multipliers.items()})
        return row


@dataclass
class StepResult:
    phi: object
    record: IterationRecord
    projection: ProjectionResult
    stationary: bool
    multipliers: object


def metric_norm(metric, values) -> float:
    return math.sqrt(max(float(values @ (metric @ values)), 0.0))


def riesz_representative(metric, dual) -> np.ndarray:
    """v with metric v = dual."""
    return sparse_solve(metric, dual)


def _record(iteration, value, projection, constraints, lambdas, tau, step_norm, stationary, backtracks):
    zeta = projection.values
    return IterationRecord(
        iteration=iteration, objective=float(value),
        constraints={c.name: c.residual(zeta) for c in constraints},
        multipliers={name: float(lam) for name, lam in zip(projection.multipliers.names, lambdas)},
        tau=tau, step_norm=step_norm, dofs=int(zeta.size),
        active_nodes=int(projection.active_lower.sum() + projection.active_upper.sum()),
        inactive_fraction=projection.inactive_fraction, stationary=stationary, backtracks=backtracks)


def vmpt_step(phi, gradient, metric, constraints, objective, armijo: ArmijoConfig = ArmijoConfig(),
              current_value: float = None, iteration: int = 0,
              stationary_tolerance: float = STATIONARY_TOLERANCE) -> StepResult:
    """One projected descent step phi -> P(phi - tau v), v the metric Riesz representative of ``gradient``.

    ``objective`` maps a PhaseField to the reduced objective value. Multipliers of the
    integral constraints are the projection multipliers divided by the accepted tau.
    """
    values = phi.values
    gradient = np.asarray(gradient, dtype=float)
    current_value = objective(phi) if current_value is None else current_value
    v = riesz_representative(metric, gradient)
    phi_norm = metric_norm(metric, values)

    tau = armijo.initial_step
    for backtrack in range(armijo.max_backtracks + 1):
        projection = pdas_project(values - tau * v, metric, constraints)
        step = projection.values - values
        step_norm = metric_norm(metric, step)
        slope = float(gradient @ step)
        lambdas = projection.multipliers.lambdas / tau

        if backtrack == 0 and step_norm <= stationary_tolerance * phi_norm:
            logger.info(f'vmpt_step: iteration {iteration} stationary, |step|_M = {step_norm:.3e}')
            record = _record(iteration, current_value, projection, constraints, lambdas, tau, step_norm, True, 0)
            return StepResult(phi=phi, record=record, projection=projection, stationary=True,
                              multipliers=_scaled(projection, tau))
        if slope >= 0.0:
            logger.info(f'vmpt_step: iteration {iteration} stationary, no descent at tau = {tau:.1e} (slope {slope:.3e})')
            record = _record(iteration, current_value, projection, constraints, lambdas, tau, step_norm, True,
                             backtrack)
            return StepResult(phi=phi, record=record, projection=projection, stationary=True,
                              multipliers=_scaled(projection, tau))

        trial = phi.with_values(projection.values)
        try:
            trial_value = objective(trial)
        except ConvergenceError as err:
            logger.warning(f'vmpt_step: state solve failed at tau = {tau:.3e} ({err}); backtracking')
            trial_value = math.inf
        if trial_value <= current_value + armijo.sufficient_decrease * slope and trial_value < current_value:
            logger.debug(f'vmpt_step: iteration {iteration} accepted tau = {tau:.3e} after {backtrack} backtracks, '
                         f'J = {trial_value:.9e}')
            record = _record(iteration, trial_value, projection, constraints, lambdas, tau, step_norm, False,
                             backtrack)
            return StepResult(phi=trial, record=record, projection=projection, stationary=False,
                              multipliers=_scaled(projection, tau))
        tau *= armijo.shrink
    raise LineSearchError(f'vmpt_step: no sufficient decrease after {armijo.max_backtracks} backtracks '
                          f'(last tau {tau / armijo.shrink:.3e})', tau=tau / armijo.shrink)


def _scaled(projection, tau):
    multipliers = projection.multipliers
    return MultiplierState(names=list(multipliers.names), lambdas=multipliers.lambdas / tau,
                           active_flags=multipliers.active_flags.copy(), slackness=multipliers.slackness / tau)
