"""Refinement indicator from normal-derivative jumps of the phase field, and marking."""
import logging

import numpy as np

logger = logging.getLogger(__name__)

DOERFLER_FRACTION = 0.5
JUMP_TOLERANCE = 1e-12


def phase_jump_indicator(mesh, phi) -> np.ndarray:
    """eta_T = sum over interior edges e of T of |e| |[d phi_h / d n_e]|."""
    values = mesh.check_field(getattr(phi, 'values', phi), 'phase field')
    grads = np.einsum('tkd,tk->td', mesh.barycentric_gradients, values[mesh.triangles])

    interior = np.flatnonzero(mesh.edge_triangles[:, 1] >= 0)
    t1, t2 = mesh.edge_triangles[interior, 0], mesh.edge_triangles[interior, 1]
    d = mesh.vertices[mesh.edges[interior, 1]] - mesh.vertices[mesh.edges[interior, 0]]
    length = mesh.edge_lengths[interior]
    normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    jump = np.abs(np.einsum('ed,ed->e', grads[t1] - grads[t2], normal))
    # jumps of an affine field are roundoff of the gradient recovery
    scale = max(1.0, float(np.abs(values).max(initial=0.0) * np.abs(mesh.barycentric_gradients).max(initial=0.0)))
    jump[jump <= JUMP_TOLERANCE * scale] = 0.0

    contribution = length * jump
    eta = (np.bincount(t1, weights=contribution, minlength=mesh.n_triangles)
           + np.bincount(t2, weights=contribution, minlength=mesh.n_triangles))
    return eta


def doerfler_mark(indicator, fraction: float = DOERFLER_FRACTION) -> np.ndarray:
    """Smallest set of largest indicators carrying ``fraction`` of the total squared indicator.

    Ties are broken by triangle index.
    """
    eta2 = np.asarray(indicator, dtype=float) ** 2
    total = eta2.sum()
    if total <= JUMP_TOLERANCE ** 2:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-eta2, kind='stable')
    cumulative = np.cumsum(eta2[order])
    count = int(np.searchsorted(cumulative, fraction * total)) + 1
    marked = np.sort(order[:min(count, order.size)])
    logger.debug(f'doerfler_mark: {marked.size} of {eta2.size} triangles marked')
    return marked
