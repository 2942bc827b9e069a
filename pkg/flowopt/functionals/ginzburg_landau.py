"""Ginzburg-Landau interface energy with the double-obstacle potential.

Only the smooth part of the obstacle potential, 1/2 (1 - phi^2), enters the value and
the derivative; the box constraint is left to the projection in the optimizer.
"""
import logging

from flowopt.fem.assembly import p1_mass, p1_stiffness
from flowopt.flow.params import C0_DEFAULT
from flowopt.functionals.base import FunctionalTerm, FunctionalValue

logger = logging.getLogger(__name__)


def eval_ginzburg_landau(phi, eps: float, gamma: float, c0: float = C0_DEFAULT) -> FunctionalValue:
    """(gamma / (2 c0)) * integral of (1/eps) 1/2 (1 - phi^2) + (eps/2) |grad phi|^2."""
    phi.check_box(1e-12)
    mesh = phi.mesh
    M, K = p1_mass(mesh), p1_stiffness(mesh)
    values = phi.values
    Mv, Kv = M @ values, K @ values
    scale = gamma / (2.0 * c0)

    potential = 0.5 * (mesh.area - values @ Mv) / eps
    gradient = 0.5 * eps * (values @ Kv)
    result = FunctionalValue.zero(mesh, scale * (potential + gradient))
    result.d_phi_l2 = -(scale / eps) * Mv
    result.d_phi_grad = (scale * eps) * Kv
    return result


class GinzburgLandauTerm(FunctionalTerm):
    """Perimeter regularization; gamma, epsilon and c0 come from the physical parameters."""
    kind = 'ginzburg_landau'
    depends_on_state = False

    def evaluate(self, phi, state, params) -> FunctionalValue:
        return eval_ginzburg_landau(phi, params.epsilon, params.gamma, params.c0)
