import logging

import numpy as np
from django.core.exceptions import ImproperlyConfigured

from flowopt.fem.assembly import assemble_load, assemble_vector_load
from flowopt.functionals.base import FunctionalTerm, FunctionalValue

logger = logging.getLogger(__name__)


def region_indicator(points, region):
    """1 at points inside the closed rectangle ((x0, x1), (y0, y1)), 0 elsewhere."""
    (x0, x1), (y0, y1) = region
    x, y = points[..., 0], points[..., 1]
    return ((x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)).astype(float)


def eval_least_squares(phi, state, region, pressure_target=0.0, velocity_target=(0.0, 0.0),
                       pressure_weight=0.0, velocity_weight=0.0) -> FunctionalValue:
    """integral of 1/2 (1 + phi) chi_Q (d1 |p - p*|^2 + d2 |u - u*|^2) over the fluid part of Q."""
    spaces = state.spaces
    W, points, _, _ = spaces.p1.geometry()
    chi_q = region_indicator(points, region)
    chi = 0.5 * (1.0 + phi.at_quadrature())
    dp = spaces.pressure.evaluate(state.pressure) - pressure_target
    du = spaces.velocity.evaluate(state.velocity) - np.asarray(velocity_target, dtype=float)

    misfit = pressure_weight * dp ** 2 + velocity_weight * np.sum(du ** 2, axis=-1)
    result = FunctionalValue.zero(phi.mesh, np.sum(W * chi * chi_q * misfit))
    result.d_phi_l2 = assemble_load(spaces.p1, 0.5 * chi_q * misfit)
    result.d_velocity = assemble_vector_load(spaces.velocity, (2.0 * velocity_weight * chi * chi_q)[..., None] * du)
    result.d_pressure = assemble_load(spaces.p1, 2.0 * pressure_weight * chi * chi_q * dp)
    return result


class LeastSquaresTerm(FunctionalTerm):
    """Tracking of constant pressure and velocity targets on the rectangle REGION."""
    kind = 'least_squares'
    required_keys = ['REGION']
    allowed_keys = ['REGION', 'PRESSURE_TARGET', 'VELOCITY_TARGET', 'PRESSURE_WEIGHT', 'VELOCITY_WEIGHT']

    pressure_target = 0.0
    velocity_target = (0.0, 0.0)
    pressure_weight = 0.0
    velocity_weight = 0.0

    def validate(self):
        if self.pressure_weight < 0 or self.velocity_weight < 0:
            raise ImproperlyConfigured(f'{self._get_term_classname()}: tracking weights must be nonnegative')
        if self.pressure_weight == 0 and self.velocity_weight == 0:
            logger.warning(f'{self._get_term_classname()}: both tracking weights are zero; the term vanishes')

    def evaluate(self, phi, state, params) -> FunctionalValue:
        return eval_least_squares(phi, state, self.region, float(self.pressure_target), self.velocity_target,
                                  float(self.pressure_weight), float(self.velocity_weight))
