"""Hydrodynamic force on the object in a fixed direction a.

Three evaluations are offered: the diffuse surface form weighted by grad phi, the
line integral over the discrete zero level set, and the volume form with a vector
field eta that equals a near the object and vanishes on the outer boundary.
"""
import logging

import numpy as np
from django.core.exceptions import ImproperlyConfigured

from flowopt.exceptions import LevelSetError, MeshError
from flowopt.fem.assembly import (assemble_gradient_load, assemble_load, assemble_vector_gradient_load,
                                  assemble_vector_load, p1_stiffness)
from flowopt.fem.levelset import barycentric, extract_zero_level_set
from flowopt.fem.linalg import apply_dirichlet, sparse_solve
from flowopt.fem.quadrature import gauss_legendre_segment
from flowopt.functionals.base import FunctionalTerm, FunctionalValue, unit_vector

logger = logging.getLogger(__name__)

EXTENSION_TOLERANCE = 1e-12


def _stress(mu, grad_u, p):
    """mu (grad u + grad u^T) - p I for (..., 2, 2) gradients and (...) pressures."""
    sym = grad_u + np.swapaxes(grad_u, -1, -2)
    return mu * sym - p[..., None, None] * np.eye(2)


def eval_diffuse_surface_force(phi, state, a, mu) -> FunctionalValue:
    """integral of 1/2 a . (mu (grad u + grad u^T) - p I) grad phi."""
    a = np.asarray(a, dtype=float)
    spaces = state.spaces
    W = spaces.p1.geometry()[0]
    grad_phi = phi.gradient()
    grad_u = spaces.velocity.gradient(state.velocity)
    p = spaces.pressure.evaluate(state.pressure)
    sigma = _stress(mu, grad_u, p)

    sigma_a = np.einsum('tqij,i->tqj', sigma, a)
    a_grad_phi = np.einsum('tqd,d->tq', grad_phi, a)
    result = FunctionalValue.zero(phi.mesh, 0.5 * np.sum(W * np.einsum('tqj,tqj->tq', sigma_a, grad_phi)))
    result.d_phi_grad = assemble_gradient_load(spaces.p1, 0.5 * sigma_a)
    tensor = 0.5 * mu * (a[None, None, :, None] * grad_phi[..., None, :]
                         + grad_phi[..., :, None] * a[None, None, None, :])
    result.d_velocity = assemble_vector_gradient_load(spaces.velocity, tensor)
    result.d_pressure = assemble_load(spaces.p1, -0.5 * a_grad_phi)
    return result


def _fluid_side(mesh, values, owners):
    """For each owner triangle, itself if most of its vertices are fluid, else its most fluid neighbour."""
    positive = (values[mesh.triangles] > 0.0).sum(axis=1)
    totals = values[mesh.triangles].sum(axis=1)
    chosen = owners.copy()
    for i, t in enumerate(owners):
        if positive[t] >= 2:
            continue
        best = t
        for e in mesh.tri_edges[t]:
            other = mesh.edge_triangles[e, 1] if mesh.edge_triangles[e, 0] == t else mesh.edge_triangles[e, 0]
            if other < 0:
                continue
            if (positive[other], totals[other]) > (positive[best], totals[best]):
                best = other
        chosen[i] = best
    return chosen


def eval_sharp_surface_force(phi, state, a, mu) -> float:
    """Line integral of a . sigma nu over the zero level set, nu pointing into the fluid.

    Velocity gradients and pressure are traces from the fluid side: the cut triangle
    itself when at least two of its vertices are fluid, otherwise its most fluid
    neighbour, whose polynomials are extended across the shared edge.
    """
    a = np.asarray(a, dtype=float)
    mesh = phi.mesh
    polyline = extract_zero_level_set(mesh, phi)
    if len(polyline) == 0:
        raise LevelSetError('eval_sharp_surface_force: the zero level set of the phase field is empty')

    s, w = gauss_legendre_segment(2)
    start, end = polyline.segments[:, 0], polyline.segments[:, 1]
    points = start[:, None, :] + s[None, :, None] * (end - start)[:, None, :]
    weights = polyline.lengths[:, None] * w[None, :]
    nu = -polyline.outward_normals

    owners = _fluid_side(mesh, phi.values, polyline.triangles)
    triangles = np.repeat(owners, s.size)
    flat_points = points.reshape(-1, 2)
    bary = barycentric(mesh, triangles, flat_points)

    spaces = state.spaces
    grad_u = spaces.velocity.gradient_in(state.velocity, triangles, bary)
    p = spaces.pressure.evaluate_in(state.pressure, triangles, bary)
    traction = np.einsum('nij,nj->ni', _stress(mu, grad_u, p), np.repeat(nu, s.size, axis=0))
    value = float(np.sum(weights.ravel() * (traction @ a)))
    logger.debug(f'eval_sharp_surface_force: {len(polyline)} segments, value {value:.9e}')
    return value


def solve_eta_extension(mesh, square, a) -> np.ndarray:
    """Nodal P1 field equal to a on the closed rectangle ``square``, zero on the outer
    boundary and componentwise discrete harmonic in between.

    ``square`` is ((x0, x1), (y0, y1)); it must lie strictly inside the domain.
    """
    (x0, x1), (y0, y1) = square
    a = np.asarray(a, dtype=float)
    xmin, xmax, ymin, ymax = mesh.bounds
    if not (xmin < x0 < x1 < xmax and ymin < y0 < y1 < ymax):
        raise MeshError(f'solve_eta_extension: square {square} must lie strictly inside the domain '
                        f'({xmin}, {xmax}) x ({ymin}, {ymax})')
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    tol = EXTENSION_TOLERANCE * max(xmax - xmin, ymax - ymin)
    inside = np.flatnonzero((x >= x0 - tol) & (x <= x1 + tol) & (y >= y0 - tol) & (y <= y1 + tol))
    if inside.size == 0:
        logger.warning(f'solve_eta_extension: no mesh vertex lies in {square}; eta vanishes')
    outer = mesh.boundary_vertices

    dofs = np.concatenate([outer, inside])
    K = p1_stiffness(mesh)
    eta = np.zeros((mesh.n_vertices, 2))
    for c in range(2):
        values = np.concatenate([np.zeros(outer.size), np.full(inside.size, a[c])])
        if not np.any(values):
            continue
        matrix, rhs = apply_dirichlet(K, np.zeros(mesh.n_vertices), dofs, values)
        eta[:, c] = sparse_solve(matrix, rhs)
    return eta


def _eta_at_quadrature(space, eta):
    values = np.stack([space.evaluate(eta[:, 0]), space.evaluate(eta[:, 1])], axis=-1)
    grads = np.stack([space.gradient(eta[:, 0]), space.gradient(eta[:, 1])], axis=-2)
    return values, grads


def _body_force(spaces, params):
    points = spaces.p1.geometry()[1]
    return params.force_at(points[..., 0], points[..., 1])


def eval_volume_drag(phi, state, eta, mu, f=None) -> FunctionalValue:
    """-integral of 1/2 (1 + phi)(mu grad u : grad eta - (u . grad) eta . u - p div eta - f . eta).

    ``f`` is a (T, Q, 2) body force at quadrature points, or None.
    """
    spaces = state.spaces
    W = spaces.p1.geometry()[0]
    chi = 0.5 * (1.0 + phi.at_quadrature())
    eta_q, grad_eta = _eta_at_quadrature(spaces.p1, np.asarray(eta, dtype=float))
    div_eta = grad_eta[..., 0, 0] + grad_eta[..., 1, 1]
    u = spaces.velocity.evaluate(state.velocity)
    grad_u = spaces.velocity.gradient(state.velocity)
    p = spaces.pressure.evaluate(state.pressure)

    integrand = (mu * np.einsum('tqij,tqij->tq', grad_u, grad_eta)
                 - np.einsum('tqd,tqcd,tqc->tq', u, grad_eta, u)
                 - p * div_eta)
    if f is not None:
        integrand = integrand - np.einsum('tqd,tqd->tq', f, eta_q)

    result = FunctionalValue.zero(phi.mesh, -np.sum(W * chi * integrand))
    result.d_phi_l2 = assemble_load(spaces.p1, -0.5 * integrand)
    sym = grad_eta + np.swapaxes(grad_eta, -1, -2)
    result.d_velocity = (assemble_vector_load(spaces.velocity, chi[..., None] * np.einsum('tqcd,tqd->tqc', sym, u))
                         + assemble_vector_gradient_load(spaces.velocity, -mu * chi[..., None, None] * grad_eta))
    result.d_pressure = assemble_load(spaces.p1, chi * div_eta)
    return result


def eval_volume_force_identity(phi, state, eta, mu, f=None, indicator: str = 'diffuse') -> float:
    """Fluid-region volume form of the force with convection written as (u . grad) u . eta.

    ``indicator='diffuse'`` weights by 1/2 (1 + phi); ``'sharp'`` by the fluid indicator
    {phi > 0} at quadrature points.
    """
    spaces = state.spaces
    W = spaces.p1.geometry()[0]
    phi_q = phi.at_quadrature()
    if indicator == 'diffuse':
        chi = 0.5 * (1.0 + phi_q)
    elif indicator == 'sharp':
        chi = (phi_q > 0.0).astype(float)
    else:
        raise ValueError(f'eval_volume_force_identity: unknown indicator {indicator!r}')
    eta_q, grad_eta = _eta_at_quadrature(spaces.p1, np.asarray(eta, dtype=float))
    div_eta = grad_eta[..., 0, 0] + grad_eta[..., 1, 1]
    u = spaces.velocity.evaluate(state.velocity)
    grad_u = spaces.velocity.gradient(state.velocity)
    p = spaces.pressure.evaluate(state.pressure)
    integrand = (mu * np.einsum('tqij,tqij->tq', grad_u, grad_eta)
                 + np.einsum('tqd,tqcd,tqc->tq', u, grad_u, eta_q)
                 - p * div_eta)
    if f is not None:
        integrand = integrand - np.einsum('tqd,tqd->tq', f, eta_q)
    return float(-np.sum(W * chi * integrand))


class SurfaceForceTerm(FunctionalTerm):
    """Diffuse surface force in DIRECTION (drag for a = u_inf, lift for its normal)."""
    kind = 'surface_force'
    required_keys = ['DIRECTION']
    allowed_keys = ['DIRECTION']

    def validate(self):
        self.direction = unit_vector(self.direction, 'DIRECTION', self._get_term_classname())

    def evaluate(self, phi, state, params) -> FunctionalValue:
        return eval_diffuse_surface_force(phi, state, self.direction, params.mu)

    def sharp_value(self, phi, state, params) -> float:
        return eval_sharp_surface_force(phi, state, self.direction, params.mu)


class VolumeDragTerm(FunctionalTerm):
    """Volume form of the force; SQUARE is the rectangle ((x0, x1), (y0, y1)) where eta = DIRECTION."""
    kind = 'volume_drag'
    required_keys = ['DIRECTION', 'SQUARE']
    allowed_keys = ['DIRECTION', 'SQUARE']

    def validate(self):
        self.direction = unit_vector(self.direction, 'DIRECTION', self._get_term_classname())
        try:
            (x0, x1), (y0, y1) = self.square
        except (TypeError, ValueError):
            raise ImproperlyConfigured(f'{self._get_term_classname()}: SQUARE must be [[x0, x1], [y0, y1]], '
                                       f'got {self.square}')
        if not (x0 < x1 and y0 < y1):
            raise ImproperlyConfigured(f'{self._get_term_classname()}: SQUARE {self.square} is empty')
        self.square = ((float(x0), float(x1)), (float(y0), float(y1)))

    def validate_domain(self, width, height):
        (x0, x1), (y0, y1) = self.square
        if not (0.0 < x0 and x1 < width and 0.0 < y0 and y1 < height):
            raise ImproperlyConfigured(f'{self._get_term_classname()}: SQUARE {self.square} touches the boundary '
                                       f'of the domain (0, {width}) x (0, {height})')

    def eta(self, mesh) -> np.ndarray:
        return self.mesh_data(mesh, lambda m: solve_eta_extension(m, self.square, self.direction))

    def evaluate(self, phi, state, params) -> FunctionalValue:
        f = _body_force(state.spaces, params) if params.body_force is not None else None
        return eval_volume_drag(phi, state, self.eta(phi.mesh), params.mu, f)

    def identity_value(self, phi, state, params, indicator='diffuse') -> float:
        f = _body_force(state.spaces, params) if params.body_force is not None else None
        return eval_volume_force_identity(phi, state, self.eta(phi.mesh), params.mu, f, indicator)
