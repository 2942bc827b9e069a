"""Vectorized Galerkin assembly with scipy.sparse.

Element matrices are formed for all triangles at once with ``numpy.einsum`` and
scattered through a COO matrix; duplicate entries are summed in a fixed order,
so two assemblies of the same input are bit-identical.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from flowopt.exceptions import MeshError
from flowopt.fem.quadrature import QuadratureRule, get_rule
from flowopt.fem.spaces import ScalarSpace, VectorSpace, basis_values, taylor_hood

logger = logging.getLogger(__name__)

SCALAR_KINDS = ('mass', 'stiffness', 'weighted_mass')
OSEEN_FORMS = ('picard', 'newton', 'adjoint')


def _scatter(row_dofs, col_dofs, local, shape):
    rows = np.broadcast_to(row_dofs[:, :, None], local.shape)
    cols = np.broadcast_to(col_dofs[:, None, :], local.shape)
    return sparse.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()


def _accumulate(dofs, local, size):
    return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=size)


def at_quadrature(space, field, rule: QuadratureRule = None):
    """Evaluate a coefficient at the quadrature points of ``space``'s mesh.

    ``field`` may be a constant, a callable ``f(x, y)``, a (T, Q) array of point values,
    a nodal P1 vector on the mesh, or a nodal vector of ``space`` itself.
    """
    rule = rule or get_rule()
    mesh = space.mesh
    if field is None:
        return None
    if callable(field):
        points = space.geometry(rule)[1]
        return np.asarray(field(points[..., 0], points[..., 1]), dtype=float)
    values = np.asarray(field, dtype=float)
    if values.ndim == 0:
        return np.full((mesh.n_triangles, rule.size), float(values))
    if values.shape == (mesh.n_triangles, rule.size):
        return values
    if values.shape == (mesh.n_vertices,):
        return np.einsum('qk,tk->tq', basis_values(1, rule.points), values[mesh.triangles])
    if isinstance(space, ScalarSpace) and values.shape == (space.n_dofs,):
        return space.evaluate(values, rule)
    raise MeshError(f'at_quadrature: field of shape {values.shape} does not live on {mesh}')


def assemble_scalar(kind: str, space: ScalarSpace, weight=None, rule: QuadratureRule = None):
    """Mass, stiffness or weighted mass matrix of a scalar space."""
    if kind not in SCALAR_KINDS:
        raise ValueError(f'assemble_scalar: unknown kind {kind!r}; expected one of {SCALAR_KINDS}')
    if kind == 'weighted_mass' and weight is None:
        raise ValueError('assemble_scalar: weighted_mass needs a weight field')
    rule = rule or get_rule()
    W, _, phi, grads = space.geometry(rule)
    coef = at_quadrature(space, weight, rule)
    Wc = W if coef is None else W * coef
    if kind == 'stiffness':
        local = np.einsum('tq,tqid,tqjd->tij', Wc, grads, grads)
    else:
        local = np.einsum('tq,qi,qj->tij', Wc, phi, phi)
    return _scatter(space.dofs, space.dofs, local, (space.n_dofs, space.n_dofs))


def assemble_load(space: ScalarSpace, values, rule: QuadratureRule = None) -> np.ndarray:
    """Dual vector (f, psi_i) of a scalar space."""
    rule = rule or get_rule()
    W, _, phi, _ = space.geometry(rule)
    f = at_quadrature(space, values, rule)
    return _accumulate(space.dofs, np.einsum('tq,qi,tq->ti', W, phi, f), space.n_dofs)


def assemble_gradient_load(space: ScalarSpace, vectors, rule: QuadratureRule = None) -> np.ndarray:
    """Dual vector (F, grad psi_i) for a (T, Q, 2) field F."""
    rule = rule or get_rule()
    W, _, _, grads = space.geometry(rule)
    return _accumulate(space.dofs, np.einsum('tq,tqid,tqd->ti', W, grads, vectors), space.n_dofs)


def assemble_vector_load(space: VectorSpace, vectors, rule: QuadratureRule = None) -> np.ndarray:
    """Dual vector (F, v) for a (T, Q, 2) field F."""
    rule = rule or get_rule()
    W, _, phi, _ = space.geometry(rule)
    dofs = space.scalar.dofs
    parts = [_accumulate(dofs, np.einsum('tq,qi,tq->ti', W, phi, vectors[..., c]), space.n_scalar)
             for c in range(2)]
    return np.concatenate(parts)


def assemble_vector_gradient_load(space: VectorSpace, tensors, rule: QuadratureRule = None) -> np.ndarray:
    """Dual vector (G, grad v) for a (T, Q, 2, 2) field G, G[c, d] pairing with d v_c / d x_d."""
    rule = rule or get_rule()
    W, _, _, grads = space.geometry(rule)
    dofs = space.scalar.dofs
    parts = [_accumulate(dofs, np.einsum('tq,tqid,tqd->ti', W, grads, tensors[..., c, :]), space.n_scalar)
             for c in range(2)]
    return np.concatenate(parts)


@dataclass
class SaddleSystem:
    """Blocks of [[A, B^T, 0], [B, 0, m], [0, m^T, 0]].

    The last row fixes the pressure mean; its multiplier absorbs any flux defect of the
    boundary data.
    """
    A: sparse.csr_matrix
    B: sparse.csr_matrix
    mean: np.ndarray

    @property
    def n_velocity(self) -> int:
        return self.A.shape[0]

    @property
    def n_pressure(self) -> int:
        return self.B.shape[0]

    @property
    def size(self) -> int:
        return self.n_velocity + self.n_pressure + 1

    def matrix(self) -> sparse.csr_matrix:
        m = sparse.csr_matrix(self.mean.reshape(-1, 1))
        return sparse.bmat([
            [self.A, self.B.T, None],
            [self.B, None, m],
            [None, m.T, None],
        ], format='csr')

    def transpose(self) -> 'SaddleSystem':
        return SaddleSystem(A=self.A.T.tocsr(), B=self.B, mean=self.mean)


def _check_pair(space_u, space_p):
    if not isinstance(space_u, VectorSpace) or not isinstance(space_p, ScalarSpace) or space_p.degree != 1:
        raise MeshError('assemble_oseen: only the Taylor-Hood pair (P2 vector, P1 scalar) is admissible')
    if space_u.mesh is not space_p.mesh:
        raise MeshError('assemble_oseen: velocity and pressure spaces live on different meshes')


def assemble_divergence(space_u: VectorSpace, space_p: ScalarSpace, rule: QuadratureRule = None):
    """B with B[r, v] = -(psi_r, div v) and the mean row m_r = (1, psi_r)."""
    _check_pair(space_u, space_p)
    rule = rule or get_rule()
    W, _, _, grads = space_u.geometry(rule)
    psi = basis_values(1, rule.points)
    n_s = space_u.n_scalar
    blocks = [
        -_scatter(space_p.dofs, space_u.scalar.dofs, np.einsum('tq,qr,tqj->trj', W, psi, grads[..., c]),
                  (space_p.n_dofs, n_s))
        for c in range(2)
    ]
    mean = _accumulate(space_p.dofs, np.einsum('tq,qr->tr', W, psi), space_p.n_dofs)
    return sparse.hstack(blocks, format='csr'), mean


def assemble_oseen(space_u: VectorSpace, space_p: ScalarSpace, mu: float, alpha_field=None,
                   advection=None, reaction_grad=None, form: str = 'picard', viscous: str = 'gradient',
                   rule: QuadratureRule = None) -> SaddleSystem:
    """Linearized Navier-Stokes-Brinkman operator.

    A carries mu (grad u, grad v) + (alpha u, v) + ((w . grad) u, v) with w = ``advection``;
    ``form='newton'`` adds ((u . grad) W, v) with W = ``reaction_grad`` (defaults to the
    advection field); ``form='adjoint'`` returns the transpose of the newton operator.
    ``viscous='symmetric'`` uses mu (grad u + grad u^T) : grad v instead.
    """
    if form not in OSEEN_FORMS:
        raise ValueError(f'assemble_oseen: unknown form {form!r}; expected one of {OSEEN_FORMS}')
    if viscous not in ('gradient', 'symmetric'):
        raise ValueError(f'assemble_oseen: unknown viscous form {viscous!r}')
    _check_pair(space_u, space_p)
    rule = rule or get_rule()
    W, _, phi, grads = space_u.geometry(rule)
    dofs = space_u.scalar.dofs
    n_s = space_u.n_scalar

    local = mu * np.einsum('tq,tqid,tqjd->tij', W, grads, grads)
    alpha = at_quadrature(space_u.scalar, alpha_field, rule)
    if alpha is not None:
        local = local + np.einsum('tq,qi,qj->tij', W * alpha, phi, phi)
    if advection is not None:
        w = space_u.evaluate(advection, rule)
        local = local + np.einsum('tq,tqd,tqjd,qi->tij', W, w, grads, phi)

    blocks = [[None, None], [None, None]]
    for c in range(2):
        blocks[c][c] = local

    if form in ('newton', 'adjoint'):
        field = reaction_grad if reaction_grad is not None else advection
        if field is not None:
            dW = space_u.gradient(field, rule)
            for c in range(2):
                for d in range(2):
                    reaction = np.einsum('tq,qi,qj->tij', W * dW[..., c, d], phi, phi)
                    blocks[c][d] = reaction if blocks[c][d] is None else blocks[c][d] + reaction

    if viscous == 'symmetric':
        for i in range(2):
            for j in range(2):
                extra = mu * np.einsum('tq,tqa,tqb->tab', W, grads[..., j], grads[..., i])
                blocks[i][j] = extra if blocks[i][j] is None else blocks[i][j] + extra

    A = sparse.bmat([[None if blocks[c][d] is None else _scatter(dofs, dofs, blocks[c][d], (n_s, n_s))
                      for d in range(2)] for c in range(2)], format='csr')
    B, mean = assemble_divergence(space_u, space_p, rule)
    system = SaddleSystem(A=A, B=B, mean=mean)
    if form == 'adjoint':
        system = system.transpose()
    return system


def p1_mass(mesh):
    """P1 mass matrix of ``mesh``, kept in the mesh cache."""
    if 'p1_mass' not in mesh.cache:
        mesh.cache['p1_mass'] = assemble_scalar('mass', taylor_hood(mesh).p1)
    return mesh.cache['p1_mass']


def p1_stiffness(mesh):
    """P1 stiffness matrix of ``mesh``, kept in the mesh cache."""
    if 'p1_stiffness' not in mesh.cache:
        mesh.cache['p1_stiffness'] = assemble_scalar('stiffness', taylor_hood(mesh).p1)
    return mesh.cache['p1_stiffness']
