import logging

import numpy as np
from django.core.exceptions import ImproperlyConfigured

from flowopt.fem.assembly import assemble_load, assemble_vector_gradient_load, assemble_vector_load
from flowopt.functionals.base import FunctionalTerm, FunctionalValue

logger = logging.getLogger(__name__)


def eval_potential_power(phi, state, mu, f=None) -> FunctionalValue:
    """integral of 1/2 (1 + phi)(mu/2 |grad u|^2 - f . u); ``f`` at quadrature points or None."""
    spaces = state.spaces
    W = spaces.p1.geometry()[0]
    chi = 0.5 * (1.0 + phi.at_quadrature())
    u = spaces.velocity.evaluate(state.velocity)
    grad_u = spaces.velocity.gradient(state.velocity)

    density = 0.5 * mu * np.sum(grad_u ** 2, axis=(-1, -2))
    if f is not None:
        density = density - np.einsum('tqd,tqd->tq', f, u)

    result = FunctionalValue.zero(phi.mesh, np.sum(W * chi * density))
    result.d_phi_l2 = assemble_load(spaces.p1, 0.5 * density)
    result.d_velocity = assemble_vector_gradient_load(spaces.velocity, mu * chi[..., None, None] * grad_u)
    if f is not None:
        result.d_velocity -= assemble_vector_load(spaces.velocity, chi[..., None] * f)
    return result


def eval_moreau_yosida(phi, state, s, D, mu) -> FunctionalValue:
    """(s/2) max(0, P - D)^2 with P the potential power without body force."""
    power = eval_potential_power(phi, state, mu)
    violation = max(0.0, power.value - D)
    if violation == 0.0:
        return FunctionalValue.zero(phi.mesh)
    result = power.scaled(s * violation)
    result.value = 0.5 * s * violation ** 2
    logger.debug(f'eval_moreau_yosida: power {power.value:.6e} exceeds {D} by {violation:.3e}')
    return result


def _body_force(state, params):
    if params.body_force is None:
        return None
    points = state.spaces.p1.geometry()[1]
    return params.force_at(points[..., 0], points[..., 1])


class PotentialPowerTerm(FunctionalTerm):
    kind = 'potential_power'

    def evaluate(self, phi, state, params) -> FunctionalValue:
        return eval_potential_power(phi, state, params.mu, _body_force(state, params))


class MoreauYosidaTerm(FunctionalTerm):
    """Relaxed cap P <= D on the potential power, with penalty parameter S."""
    kind = 'moreau_yosida'
    required_keys = ['S', 'D']
    allowed_keys = ['S', 'D']

    def validate(self):
        for key in ('s', 'd'):
            value = getattr(self, key)
            if not isinstance(value, (int, float)) or value <= 0:
                raise ImproperlyConfigured(f'{self._get_term_classname()}: {key.upper()} must be positive, got {value}')
        self.s, self.d = float(self.s), float(self.d)

    def evaluate(self, phi, state, params) -> FunctionalValue:
        return eval_moreau_yosida(phi, state, self.s, self.d, params.mu)

    def multiplier(self, phi, state, params) -> float:
        """s max(0, P - D), the multiplier estimate of the relaxed cap."""
        return self.s * max(0.0, eval_potential_power(phi, state, params.mu).value - self.d)
