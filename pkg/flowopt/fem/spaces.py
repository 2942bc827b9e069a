"""Lagrange finite element spaces on a Mesh.

Scalar P1 (phase field, pressure, adjoint pressure) and P2, and the vector P2
space used for velocities. P2 nodes are the mesh vertices followed by the edge
midpoints; vector dofs are blocked by component (``c * n_scalar + node``).
"""
import logging

import numpy as np

from flowopt.exceptions import MeshError
from flowopt.fem.quadrature import QuadratureRule, get_rule

logger = logging.getLogger(__name__)


def basis_values(degree: int, bary: np.ndarray) -> np.ndarray:
    """(Q, nloc) shape functions at barycentric points."""
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    if degree == 1:
        return np.column_stack([l0, l1, l2])
    if degree == 2:
        return np.column_stack([
            l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
            4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1,
        ])
    raise ValueError(f'basis_values: unsupported degree {degree}')


def basis_bary_derivatives(degree: int, bary: np.ndarray) -> np.ndarray:
    """(Q, nloc, 3) derivatives of the shape functions with respect to each barycentric coordinate."""
    q = bary.shape[0]
    if degree == 1:
        return np.broadcast_to(np.eye(3), (q, 3, 3)).copy()
    if degree == 2:
        l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
        d = np.zeros((q, 6, 3))
        d[:, 0, 0] = 4 * l0 - 1
        d[:, 1, 1] = 4 * l1 - 1
        d[:, 2, 2] = 4 * l2 - 1
        d[:, 3, 1], d[:, 3, 2] = 4 * l2, 4 * l1
        d[:, 4, 2], d[:, 4, 0] = 4 * l0, 4 * l2
        d[:, 5, 0], d[:, 5, 1] = 4 * l1, 4 * l0
        return d
    raise ValueError(f'basis_bary_derivatives: unsupported degree {degree}')


class ScalarSpace:
    """Continuous scalar Lagrange space of degree 1 or 2."""

    def __init__(self, mesh, degree: int = 1):
        if degree not in (1, 2):
            raise ValueError(f'ScalarSpace: degree must be 1 or 2, got {degree}')
        self.mesh = mesh
        self.degree = degree
        if degree == 1:
            self.dofs = np.asarray(mesh.triangles)
            self.coords = np.asarray(mesh.vertices)
        else:
            self.dofs = np.hstack([mesh.triangles, mesh.n_vertices + mesh.tri_edges])
            self.coords = np.vstack([mesh.vertices, mesh.edge_midpoints])
        self.n_dofs = len(self.coords)
        self.n_local = self.dofs.shape[1]
        self._geometry = {}

    def __repr__(self):
        return f'ScalarSpace(P{self.degree}, dofs={self.n_dofs})'

    def check(self, values, name='field') -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.n_dofs:
            raise MeshError(f'{name} has {values.shape[0]} values; {self} expects {self.n_dofs}')
        return values

    def geometry(self, rule: QuadratureRule = None):
        """Quadrature weights (T, Q), points (T, Q, 2), shape values (Q, n) and gradients (T, Q, n, 2)."""
        rule = rule or get_rule()
        key = (rule.degree, rule.size)
        if key not in self._geometry:
            mesh = self.mesh
            weights = 2.0 * mesh.signed_areas[:, None] * rule.weights[None, :]
            corners = mesh.vertices[mesh.triangles]
            points = np.einsum('qk,tkd->tqd', rule.points, corners)
            values = basis_values(self.degree, rule.points)
            dref = basis_bary_derivatives(self.degree, rule.points)
            grads = np.einsum('qik,tkd->tqid', dref, mesh.barycentric_gradients)
            self._geometry[key] = (weights, points, values, grads)
        return self._geometry[key]

    def evaluate(self, values, rule: QuadratureRule = None) -> np.ndarray:
        values = self.check(values)
        _, _, phi, _ = self.geometry(rule)
        return np.einsum('qi,ti->tq', phi, values[self.dofs])

    def gradient(self, values, rule: QuadratureRule = None) -> np.ndarray:
        values = self.check(values)
        _, _, _, grads = self.geometry(rule)
        return np.einsum('tqid,ti->tqd', grads, values[self.dofs])

    def evaluate_in(self, values, triangles, bary) -> np.ndarray:
        """Values at barycentric points (N, 3) inside the given triangles (N,); points may lie outside."""
        values = self.check(values)
        phi = basis_values(self.degree, np.asarray(bary, dtype=float))
        return np.einsum('ni,ni->n', phi, values[self.dofs[triangles]])

    def gradient_in(self, values, triangles, bary) -> np.ndarray:
        values = self.check(values)
        dref = basis_bary_derivatives(self.degree, np.asarray(bary, dtype=float))
        lam = self.mesh.barycentric_gradients[triangles]
        grads = np.einsum('nik,nkd->nid', dref, lam)
        return np.einsum('nid,ni->nd', grads, values[self.dofs[triangles]])

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(x, y)``."""
        out = np.asarray(func(self.coords[:, 0], self.coords[:, 1]), dtype=float)
        return np.broadcast_to(out, (self.n_dofs,)).copy()

    def integrate(self, values, rule: QuadratureRule = None) -> float:
        weights = self.geometry(rule)[0]
        return float(np.sum(weights * self.evaluate(values, rule)))


class VectorSpace:
    """Two-component continuous P2 space built on a scalar P2 space."""

    def __init__(self, scalar: ScalarSpace):
        if scalar.degree != 2:
            raise ValueError('VectorSpace: velocities use the P2 scalar space')
        self.scalar = scalar
        self.mesh = scalar.mesh
        self.degree = scalar.degree
        self.n_scalar = scalar.n_dofs
        self.n_dofs = 2 * scalar.n_dofs
        self.coords = scalar.coords

    def __repr__(self):
        return f'VectorSpace(P{self.degree}^2, dofs={self.n_dofs})'

    def check(self, values, name='velocity') -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.n_dofs:
            raise MeshError(f'{name} has {values.shape[0]} values; {self} expects {self.n_dofs}')
        return values

    def components(self, values):
        values = self.check(values)
        return values[:self.n_scalar], values[self.n_scalar:]

    def join(self, ux, uy) -> np.ndarray:
        return np.concatenate([np.asarray(ux, dtype=float), np.asarray(uy, dtype=float)])

    def geometry(self, rule: QuadratureRule = None):
        return self.scalar.geometry(rule)

    def evaluate(self, values, rule: QuadratureRule = None) -> np.ndarray:
        """(T, Q, 2) velocity at quadrature points."""
        ux, uy = self.components(values)
        return np.stack([self.scalar.evaluate(ux, rule), self.scalar.evaluate(uy, rule)], axis=-1)

    def gradient(self, values, rule: QuadratureRule = None) -> np.ndarray:
        """(T, Q, 2, 2) with entry [i, j] = d u_i / d x_j."""
        ux, uy = self.components(values)
        return np.stack([self.scalar.gradient(ux, rule), self.scalar.gradient(uy, rule)], axis=-2)

    def evaluate_in(self, values, triangles, bary) -> np.ndarray:
        ux, uy = self.components(values)
        return np.column_stack([self.scalar.evaluate_in(ux, triangles, bary),
                                self.scalar.evaluate_in(uy, triangles, bary)])

    def gradient_in(self, values, triangles, bary) -> np.ndarray:
        ux, uy = self.components(values)
        return np.stack([self.scalar.gradient_in(ux, triangles, bary),
                         self.scalar.gradient_in(uy, triangles, bary)], axis=-2)

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(x, y) -> (ux, uy)``."""
        ux, uy = func(self.coords[:, 0], self.coords[:, 1])
        shape = (self.n_scalar,)
        return self.join(np.broadcast_to(np.asarray(ux, dtype=float), shape),
                         np.broadcast_to(np.asarray(uy, dtype=float), shape))


class TaylorHood:
    """The P2-velocity / P1-pressure pair on one mesh, plus the P1 design space."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.p1 = ScalarSpace(mesh, 1)
        self.p2 = ScalarSpace(mesh, 2)
        self.velocity = VectorSpace(self.p2)
        self.pressure = self.p1

    @property
    def n_velocity(self) -> int:
        return self.velocity.n_dofs

    @property
    def n_pressure(self) -> int:
        return self.pressure.n_dofs

    @property
    def n_unknowns(self) -> int:
        """Velocity, pressure and the mean-pressure multiplier."""
        return self.n_velocity + self.n_pressure + 1


def taylor_hood(mesh) -> TaylorHood:
    """Spaces for ``mesh``, built once and kept in the mesh cache."""
    spaces = mesh.cache.get('taylor_hood')
    if spaces is None:
        spaces = TaylorHood(mesh)
        mesh.cache['taylor_hood'] = spaces
        logger.debug(f'taylor_hood: {spaces.velocity} / {spaces.pressure} on {mesh}')
    return spaces
