"""Independent oracles for the solvers and the adjoint gradient.

Nothing here uses the optimizer: the checks run on a ReducedProblem and phase
fields built directly, so they can be trusted when the optimizer misbehaves.
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from flowopt.fem.mesh import generate_rectangle_mesh
from flowopt.fem.spaces import taylor_hood
from flowopt.flow.params import PhysicalParams
from flowopt.flow.state import PhaseField, solve_linearized_state, solve_state
from flowopt.initial import initial_phase_field
from flowopt.reduced import ReducedProblem

logger = logging.getLogger(__name__)

FD_STEPS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
BOX_MARGIN = 1e-12


@dataclass
class FiniteDifferenceReport:
    estimate: float
    plateau_step: float
    table: list = field(default_factory=list)
    reference: float = None

    @property
    def relative_error(self) -> float:
        if self.reference is None:
            return math.nan
        return abs(self.estimate - self.reference) / max(abs(self.reference), np.finfo(float).tiny)


def fd_reduced_gradient(problem: ReducedProblem, phi, direction, steps=FD_STEPS, reference: float = None):
    """Central difference quotients of the re-solved reduced objective along ``direction``.

    The plateau is the step whose quotient is closest to ``reference`` when one is
    given, otherwise the step where consecutive quotients agree best.
    """
    direction = phi.mesh.check_field(direction, 'direction')
    table = []
    for t in steps:
        plus, minus = phi.values + t * direction, phi.values - t * direction
        if max(np.abs(plus).max(), np.abs(minus).max()) > 1.0 + BOX_MARGIN:
            raise ValueError(f'fd_reduced_gradient: step {t:g} leaves the box [-1, 1]')
        quotient = (problem.objective(phi.with_values(plus)) - problem.objective(phi.with_values(minus))) / (2 * t)
        row = {'step': t, 'quotient': quotient}
        if reference is not None:
            row['error'] = abs(quotient - reference)
        table.append(row)
        logger.debug(f'fd_reduced_gradient: t = {t:.0e} quotient {quotient:.12e}')

    if reference is not None:
        best = min(range(len(table)), key=lambda k: table[k]['error'])
    elif len(table) > 1:
        best = min(range(len(table) - 1), key=lambda k: abs(table[k]['quotient'] - table[k + 1]['quotient']))
    else:
        best = 0
    return FiniteDifferenceReport(estimate=table[best]['quotient'], plateau_step=table[best]['step'], table=table,
                                  reference=reference)


def interior_direction(phi, rng) -> np.ndarray:
    """Random direction that vanishes on box-active nodes and keeps phi +- t delta feasible for t <= 1."""
    return rng.uniform(-1.0, 1.0, phi.values.size) * (1.0 - np.abs(phi.values))


def adjoint_fd_comparison(problem: ReducedProblem, phi, n_directions: int = 10, seed: int = 0,
                          steps=FD_STEPS) -> list:
    """Adjoint directional derivatives against finite differences in random interior directions."""
    rng = np.random.default_rng(seed)
    gradient = problem.gradient(phi)
    rows = []
    for k in range(n_directions):
        direction = interior_direction(phi, rng)
        adjoint = float(gradient.dual @ direction)
        report = fd_reduced_gradient(problem, phi, direction, steps, reference=adjoint)
        rows.append({'direction': k, 'adjoint': adjoint, 'finite_difference': report.estimate,
                     'plateau_step': report.plateau_step, 'relative_error': report.relative_error})
        logger.info(f'adjoint_fd_comparison: direction {k} adjoint {adjoint:.9e} fd {report.estimate:.9e} '
                    f'relative error {report.relative_error:.2e}')
    return rows


def duality_check(problem: ReducedProblem, phi, delta) -> dict:
    """Directional derivative along ``delta`` by the adjoint and by the linearized state.

    The two routes agree up to roundoff; the residual is their difference.
    """
    delta = phi.mesh.check_field(delta, 'delta')
    evaluation = problem.evaluate(phi)
    gradient = problem.gradient(phi, evaluation)
    adjoint_route = float(gradient.dual @ delta)

    objective = evaluation.objective
    linearized_route = float(objective.d_phi @ delta)
    if evaluation.state is not None:
        w, r = solve_linearized_state(phi, delta, evaluation.state, problem.params)
        linearized_route += float(objective.d_velocity @ w + objective.d_pressure @ r)
    scale = max(1.0, abs(adjoint_route), abs(linearized_route))
    residual = abs(adjoint_route - linearized_route)
    logger.debug(f'duality_check: adjoint {adjoint_route:.15e} linearized {linearized_route:.15e}')
    return {'adjoint': adjoint_route, 'linearized': linearized_route, 'residual': residual, 'scale': scale}


# -- flow solver oracles

def manufactured_velocity(x, y):
    return np.sin(np.pi * x) * np.cos(np.pi * y), -np.cos(np.pi * x) * np.sin(np.pi * y)


def manufactured_velocity_gradient(x, y):
    """(..., 2, 2) with [i, j] = d u_i / d x_j."""
    s, c = np.sin(np.pi * x), np.cos(np.pi * x)
    sy, cy = np.sin(np.pi * y), np.cos(np.pi * y)
    return np.pi * np.stack([np.stack([c * cy, -s * sy], axis=-1),
                             np.stack([s * sy, -c * cy], axis=-1)], axis=-2)


def manufactured_pressure(x, y):
    return np.sin(np.pi * x) * np.cos(np.pi * y)


def manufactured_force(mu: float):
    """f = -mu Laplace u + (u . grad) u + grad p for the manufactured pair."""
    def force(x, y):
        ux, uy = manufactured_velocity(x, y)
        s, c = np.sin(np.pi * x), np.cos(np.pi * x)
        sy, cy = np.sin(np.pi * y), np.cos(np.pi * y)
        fx = 2 * np.pi ** 2 * mu * ux + np.pi * s * c + np.pi * c * cy
        fy = 2 * np.pi ** 2 * mu * uy + np.pi * sy * cy - np.pi * s * sy
        return fx, fy
    return force


def poiseuille_velocity(x, y):
    return y * (1.0 - y), np.zeros_like(x)


def poiseuille_velocity_gradient(x, y):
    zero = np.zeros_like(x)
    return np.stack([np.stack([zero, 1.0 - 2.0 * y], axis=-1), np.stack([zero, zero], axis=-1)], axis=-2)


def _fluid_params(mu, velocity, force=None) -> PhysicalParams:
    boundary = {tag: velocity for tag in ('bottom', 'right', 'top', 'left')}
    return PhysicalParams(mu=mu, alpha_bar=1.0, epsilon=1.0, gamma=1.0, body_force=force, boundary_data=boundary)


def flow_errors(mesh, params, velocity_gradient, pressure) -> dict:
    """H1-seminorm velocity error and L2 pressure error of the pure-fluid state (phi = 1)."""
    phi = PhaseField(mesh, np.ones(mesh.n_vertices))
    state = solve_state(phi, params)
    spaces = taylor_hood(mesh)
    W, points = spaces.velocity.geometry()[:2]
    x, y = points[..., 0], points[..., 1]

    grad_error = spaces.velocity.gradient(state.velocity) - velocity_gradient(x, y)
    velocity_h1 = math.sqrt(float(np.sum(W * np.sum(grad_error ** 2, axis=(-1, -2)))))

    p_h = spaces.pressure.evaluate(state.pressure)
    p = pressure(x, y)
    area = float(W.sum())
    p_h = p_h - np.sum(W * p_h) / area
    p = p - np.sum(W * p) / area
    pressure_l2 = math.sqrt(float(np.sum(W * (p_h - p) ** 2)))
    return {'h': 1.0 / math.sqrt(mesh.n_triangles / (2.0 * area)), 'dofs': spaces.n_unknowns,
            'velocity_h1': velocity_h1, 'pressure_l2': pressure_l2}


def manufactured_flow_errors(levels: int = 3, n0: int = 8, mu: float = 1.0) -> list:
    """Errors of the Taylor-Hood solution on the unit square for meshes n0, 2 n0, ... with observed rates."""
    params = _fluid_params(mu, manufactured_velocity, manufactured_force(mu))
    rows = []
    for level in range(levels):
        n = n0 * 2 ** level
        row = flow_errors(generate_rectangle_mesh(1.0, 1.0, n, n), params, manufactured_velocity_gradient,
                          manufactured_pressure)
        row['level'] = level
        if rows:
            previous = rows[-1]
            row['velocity_rate'] = math.log2(previous['velocity_h1'] / row['velocity_h1'])
            row['pressure_rate'] = math.log2(previous['pressure_l2'] / row['pressure_l2'])
        rows.append(row)
        logger.info(f'manufactured_flow_errors: level {level} |u - u_h|_1 = {row["velocity_h1"]:.4e} '
                    f'|p - p_h| = {row["pressure_l2"]:.4e}')
    return rows


def poiseuille_flow_errors(n: int = 4, mu: float = 1.0) -> dict:
    """Channel flow u = (y (1 - y), 0), p = -2 mu (x - 1/2); exactly representable, so the errors are roundoff."""
    params = _fluid_params(mu, poiseuille_velocity)
    return flow_errors(generate_rectangle_mesh(1.0, 1.0, n, n), params, poiseuille_velocity_gradient,
                       lambda x, y: -2.0 * mu * (x - 0.5))


# -- presets

def initial_problem(spec):
    """ReducedProblem and initial phase field of a ProblemSpec on its seed mesh, first stage epsilon."""
    epsilon = (spec.optimizer.epsilon_schedule or (spec.params.epsilon,))[0]
    mesh = generate_rectangle_mesh(spec.width, spec.height, spec.nx, spec.ny)
    problem = ReducedProblem(spec.terms, spec.constraints, spec.params.with_epsilon(epsilon), spec.optimizer.metric)
    return problem, initial_phase_field(spec.initial, mesh, epsilon)


def write_report_csv(path, rows) -> Path:
    """Write oracle rows as CSV; the header is the union of the row keys in first-seen order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = []
    for row in rows:
        fieldnames.extend(k for k in row if k not in fieldnames)
    with path.open('w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f'write_report_csv: {len(rows)} rows to {path}')
    return path


# -- shape diagnostics

def _boundary_flux_triangles(mesh, params, sign):
    """Triangles on boundary edges where the prescribed normal velocity has the given sign (-1 in, +1 out)."""
    normals = {'bottom': (0.0, -1.0), 'right': (1.0, 0.0), 'top': (0.0, 1.0), 'left': (-1.0, 0.0)}
    triangles = []
    for tag, profile in params.boundary_data.items():
        edges = mesh.edges_with_tag(tag)
        if not edges.size:
            continue
        mid = mesh.edge_midpoints[edges]
        gx, gy = profile(mid[:, 0], mid[:, 1])
        un = np.broadcast_to(gx, edges.shape) * normals[tag][0] + np.broadcast_to(gy, edges.shape) * normals[tag][1]
        triangles.append(mesh.edge_triangles[edges[sign * un > 0.0], 0])
    return np.unique(np.concatenate(triangles)) if triangles else np.zeros(0, dtype=np.int64)


def fluid_connects(phi, params) -> bool:
    """True when fluid triangles (mean phi > 0) link every inflow cell to some outflow cell.

    Triangles are joined across shared edges; inflow and outflow cells are the
    boundary triangles where the Dirichlet data point into or out of the domain.
    """
    mesh = phi.mesh
    fluid = phi.values[mesh.triangles].mean(axis=1) > 0.0
    inner = mesh.edge_triangles[:, 1] >= 0
    t1, t2 = mesh.edge_triangles[inner, 0], mesh.edge_triangles[inner, 1]
    keep = fluid[t1] & fluid[t2]
    graph = sparse.coo_matrix((np.ones(int(keep.sum())), (t1[keep], t2[keep])),
                              shape=(mesh.n_triangles, mesh.n_triangles))
    _, labels = connected_components(graph, directed=False)
    inflow = _boundary_flux_triangles(mesh, params, -1)
    outflow = _boundary_flux_triangles(mesh, params, 1)
    inflow, outflow = inflow[fluid[inflow]], outflow[fluid[outflow]]
    if not inflow.size or not outflow.size:
        return False
    return bool(np.isin(labels[inflow], labels[outflow]).all())


def object_geometry(phi) -> dict:
    """Area, centroid and principal-axis inclination (degrees) of the object density (1 - phi) / 2."""
    space = taylor_hood(phi.mesh).p1
    W, points = space.geometry()[:2]
    density = W * 0.5 * (1.0 - np.clip(space.evaluate(phi.values), -1.0, 1.0))
    area = float(density.sum())
    if area <= 0.0:
        return {'area': 0.0, 'centroid': None, 'inclination': None}
    centroid = np.einsum('tq,tqd->d', density, points) / area
    offset = points - centroid
    inertia = np.einsum('tq,tqi,tqj->ij', density, offset, offset) / area
    eigenvalues, eigenvectors = np.linalg.eigh(inertia)
    axis = eigenvectors[:, np.argmax(eigenvalues)]
    if axis[0] < 0:
        axis = -axis
    return {'area': area, 'centroid': centroid.tolist(), 'inclination': math.degrees(math.atan2(axis[1], axis[0]))}
