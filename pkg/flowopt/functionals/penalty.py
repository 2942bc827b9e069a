import logging

import numpy as np

from flowopt.fem.assembly import assemble_load, assemble_vector_load
from flowopt.flow.params import hat_alpha, hat_alpha_derivative
from flowopt.functionals.base import FunctionalTerm, FunctionalValue

logger = logging.getLogger(__name__)


def eval_hat_alpha_penalty(phi, state, params) -> FunctionalValue:
    """1/2 integral of hat_alpha(phi) |u|^2, which pushes velocity out of the object."""
    spaces = state.spaces
    W = spaces.p1.geometry()[0]
    phi_q = phi.at_quadrature()
    u = spaces.velocity.evaluate(state.velocity)
    speed2 = np.sum(u ** 2, axis=-1)
    weight = hat_alpha(phi_q, params)

    result = FunctionalValue.zero(phi.mesh, 0.5 * np.sum(W * weight * speed2))
    result.d_phi_l2 = assemble_load(spaces.p1, 0.5 * hat_alpha_derivative(phi_q, params) * speed2)
    result.d_velocity = assemble_vector_load(spaces.velocity, weight[..., None] * u)
    return result


class HatAlphaPenaltyTerm(FunctionalTerm):
    kind = 'penalty_hat_alpha'

    def evaluate(self, phi, state, params) -> FunctionalValue:
        return eval_hat_alpha_penalty(phi, state, params)
