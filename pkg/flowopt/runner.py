"""Execute a ProblemSpec and write its artifacts.

An output directory receives ``snapshot_NNNNN.vtk`` files every SNAPSHOT_EVERY
iterations, ``final.vtk``, ``history.csv`` (one IterationRecord per row),
``summary.json`` and ``final_phase_field.npz`` for restarts.
"""
import csv
import json
import logging
import time
from pathlib import Path

import numpy as np
from django.conf import settings

from flowopt.exceptions import FlowOptError, LevelSetError
from flowopt.fem.indicators import phase_jump_indicator
from flowopt.fem.spaces import taylor_hood
from flowopt.fem.vtk import write_vtk
from flowopt.flow.state import check_uniqueness_bound
from flowopt.functionals.forces import eval_diffuse_surface_force, eval_sharp_surface_force
from flowopt.initial import save_phase_field
from flowopt.optimizer.diagnostics import constraint_qualification_diagnostic
from flowopt.optimizer.loop import optimize
from flowopt.verification import fluid_connects, object_geometry

logger = logging.getLogger(__name__)

HISTORY_FILE = 'history.csv'
SUMMARY_FILE = 'summary.json'
PHASE_FIELD_FILE = 'final_phase_field.npz'


def get_output_dir(output_dir=None, preset='') -> Path:
    if output_dir is not None:
        return Path(output_dir)
    return Path(getattr(settings, 'FLOWOPT_OUTPUT_DIR', 'flowopt_runs')) / (preset or 'custom')


def vtk_fields(phi, evaluation=None, adjoint=None):
    """Point and cell data of one iterate; velocity and adjoint velocity at the vertices."""
    mesh = phi.mesh
    point_data = {'phi': phi.values}
    if evaluation is not None and evaluation.state is not None:
        state = evaluation.state
        point_data['velocity'] = state.velocity_at_vertices()
        point_data['pressure'] = state.pressure[:mesh.n_vertices]
    if adjoint is not None:
        qx, qy = taylor_hood(mesh).velocity.components(adjoint.q)
        point_data['adjoint_velocity'] = np.column_stack([qx[:mesh.n_vertices], qy[:mesh.n_vertices]])
        point_data['adjoint_pressure'] = adjoint.pi[:mesh.n_vertices]
    cell_data = {'jump_indicator': phase_jump_indicator(mesh, phi)}
    return point_data, cell_data


def write_history(path, history) -> Path:
    rows = [record.as_row() for record in history]
    fieldnames = []
    for row in rows:
        fieldnames.extend(k for k in row if k not in fieldnames)
    with Path(path).open('w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    return Path(path)


class SnapshotWriter:
    """Optimizer observer writing VTK snapshots every ``every`` iterations (0 disables)."""

    def __init__(self, output_dir: Path, every: int = 0, dump_adjoint: bool = False):
        self.output_dir = output_dir
        self.every = every
        self.dump_adjoint = dump_adjoint
        self.written = []

    def __call__(self, event, **payload):
        if event == 'refine':
            logger.info(f'SnapshotWriter: mesh refined ({payload["reason"]}) to {payload["mesh"]}')
            return
        if event != 'iteration' or not self.every:
            return
        record = payload['record']
        if record.iteration % self.every:
            return
        phi, evaluation = payload['phi'], payload['evaluation']
        adjoint = None
        if self.dump_adjoint and evaluation.state is not None:
            adjoint = payload['problem'].gradient(phi, evaluation).adjoint
        point_data, cell_data = vtk_fields(phi, evaluation, adjoint)
        path = write_vtk(self.output_dir / f'snapshot_{record.iteration:05d}.vtk', phi.mesh, point_data,
                         cell_data, f'flowopt iteration {record.iteration}')
        self.written.append(path)


def _force_report(spec, result) -> dict:
    """Diffuse and sharp force values for every objective term with a DIRECTION."""
    phi, state, params = result.phi, result.state, result.problem.params
    forces = {}
    for term in spec.terms:
        direction = getattr(term, 'direction', None)
        if direction is None or state is None:
            continue
        entry = {'direction': np.asarray(direction).tolist(),
                 'diffuse': eval_diffuse_surface_force(phi, state, direction, params.mu).value}
        try:
            entry['sharp'] = eval_sharp_surface_force(phi, state, direction, params.mu)
        except LevelSetError as err:
            logger.warning(f'_force_report: no sharp force for {term!r}: {err}')
            entry['sharp'] = None
        if hasattr(term, 'identity_value'):
            entry['volume_objective'] = term.evaluate(phi, state, params).value
            entry['volume_identity_diffuse'] = term.identity_value(phi, state, params, 'diffuse')
            entry['volume_identity_sharp'] = term.identity_value(phi, state, params, 'sharp')
        forces[term.kind] = entry
    return forces


def build_summary(spec, result, runtime: float) -> dict:
    phi, state = result.phi, result.state
    evaluation = result.evaluation
    mesh = phi.mesh
    spaces = taylor_hood(mesh)
    record = result.final_record
    summary = {
        'preset': spec.preset,
        'converged': result.converged,
        'objective': evaluation.value,
        'terms': {term.kind: value.value for term, value in zip(spec.terms, evaluation.term_values)},
        'constraints': record.constraints,
        'multipliers': result.multipliers.as_dict() if result.multipliers is not None else {},
        'slackness': (np.abs(result.multipliers.slackness).max(initial=0.0).item()
                      if result.multipliers is not None else 0.0),
        'epsilon': result.problem.params.epsilon,
        'iterations': record.iteration,
        'stages': len({r.stage for r in result.history}),
        'dofs': {'phase_field': mesh.n_vertices, 'velocity': spaces.n_velocity, 'pressure': spaces.n_pressure,
                 'triangles': mesh.n_triangles},
        'runtime_seconds': runtime,
        'seed': spec.seed,
        'uniqueness': check_uniqueness_bound(state, result.problem.params, mesh.area),
        'forces': _force_report(spec, result),
        'object': object_geometry(phi),
    }
    if state is not None:
        summary['outflow_rescale'] = state.dirichlet.outflow_scale
        summary['fluid_connected'] = fluid_connects(phi, result.problem.params)
        summary['newton_residual'] = state.newton_residual
    enforced = [spec_ for spec_ in spec.constraints if spec_.enforce]
    summary['constraint_qualification'] = constraint_qualification_diagnostic(
        phi, state, enforced, result.problem.params, seed=spec.seed)
    return summary


def run_problem(spec, output_dir=None) -> dict:
    """Optimize ``spec`` and write the artifacts; returns the summary.

    On a numerical failure the history recorded so far is still written before the
    error propagates.
    """
    output_dir = get_output_dir(output_dir, spec.preset)
    output_dir.mkdir(parents=True, exist_ok=True)
    observer = SnapshotWriter(output_dir, int(spec.output.get('SNAPSHOT_EVERY', 0)),
                              bool(spec.output.get('DUMP_ADJOINT', False)))
    logger.info(f'run_problem: {spec.preset or "custom"} problem, artifacts in {output_dir}')

    start = time.perf_counter()
    try:
        result = optimize(spec, observer=observer)
    except FlowOptError as err:
        if err.history:
            write_history(output_dir / HISTORY_FILE, err.history)
        raise
    runtime = time.perf_counter() - start

    write_history(output_dir / HISTORY_FILE, result.history)
    adjoint = None
    if spec.output.get('DUMP_ADJOINT') and result.state is not None:
        adjoint = result.problem.gradient(result.phi, result.evaluation).adjoint
    point_data, cell_data = vtk_fields(result.phi, result.evaluation, adjoint)
    write_vtk(output_dir / 'final.vtk', result.phi.mesh, point_data, cell_data, 'flowopt final iterate')
    save_phase_field(output_dir / PHASE_FIELD_FILE, result.phi)

    summary = build_summary(spec, result, runtime)
    with (output_dir / SUMMARY_FILE).open('w') as f:
        json.dump(summary, f, indent=2, default=_json_default)
    logger.info(f'run_problem: J = {summary["objective"]:.9e} after {summary["iterations"]} iterations '
                f'in {runtime:.1f} s')
    return summary


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f'{type(value).__name__} is not JSON serializable')
