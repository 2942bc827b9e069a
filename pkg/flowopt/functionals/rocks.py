"""Material cost terms that depend on the phase field alone."""
import logging
import math

import numpy as np
from django.core.exceptions import ImproperlyConfigured

from flowopt.fem.assembly import assemble_load
from flowopt.fem.spaces import taylor_hood
from flowopt.functionals.base import FunctionalTerm, FunctionalValue

logger = logging.getLogger(__name__)


def clamped_sine(z):
    """sin(z) on [-pi/2, pi/2], +-1 outside."""
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z) <= 0.5 * math.pi, np.sin(z), np.sign(z))


def rock_factor(x, y, center, sigma, cost, eps):
    """Cost multiplier: ``cost`` inside the rock of radius sigma, 1 far away, a diffuse ramp between."""
    r = np.hypot(x - center[0], y - center[1]) / sigma
    return (cost - 1.0) * (clamped_sine(-(r - 1.0) / eps) + 1.0) / 2.0 + 1.0


def rock_weight(x, y, rocks, eps):
    weight = np.ones_like(np.asarray(x, dtype=float))
    for center, sigma, cost in rocks:
        weight = weight * rock_factor(x, y, center, sigma, cost, eps)
    return weight


def eval_rock_cost(phi, rocks, eps) -> FunctionalValue:
    """integral of 1/2 (1 + phi) prod_i R_i; ``rocks`` is a list of (center, sigma, cost)."""
    space = taylor_hood(phi.mesh).p1
    W, points, _, _ = space.geometry()
    weight = rock_weight(points[..., 0], points[..., 1], rocks, eps)
    chi = 0.5 * (1.0 + phi.at_quadrature())
    result = FunctionalValue.zero(phi.mesh, np.sum(W * chi * weight))
    result.d_phi_l2 = assemble_load(space, 0.5 * weight)
    return result


def eval_construction_cost(phi, unit_cost) -> FunctionalValue:
    """integral of 1/2 (1 - phi) w, the cost of building the object."""
    space = taylor_hood(phi.mesh).p1
    W = space.geometry()[0]
    chi = 0.5 * (1.0 - phi.at_quadrature())
    result = FunctionalValue.zero(phi.mesh, unit_cost * np.sum(W * chi))
    result.d_phi_l2 = assemble_load(space, -0.5 * unit_cost)
    return result


class RockCostTerm(FunctionalTerm):
    """Cost of fluid regions, raised inside circular rocks.

    ROCKS is a list of {CENTER: [x, y], SIGMA: radius, COST: c}; the interface width of
    the rock boundaries is the phase field epsilon of the current stage.
    """
    kind = 'rock_cost'
    required_keys = ['ROCKS']
    allowed_keys = ['ROCKS']
    depends_on_state = False

    def validate(self):
        rocks = []
        for rock in self.rocks:
            missing = {'CENTER', 'SIGMA', 'COST'} - set(rock)
            if missing:
                raise ImproperlyConfigured(f'{self._get_term_classname()}: rock {rock} is missing {sorted(missing)}')
            if not rock['SIGMA'] > 0:
                raise ImproperlyConfigured(f'{self._get_term_classname()}: rock radius must be positive, '
                                           f'got {rock["SIGMA"]}')
            rocks.append((tuple(float(c) for c in rock['CENTER']), float(rock['SIGMA']), float(rock['COST'])))
        self.rocks = rocks

    def evaluate(self, phi, state, params) -> FunctionalValue:
        return eval_rock_cost(phi, self.rocks, params.epsilon)


class ConstructionCostTerm(FunctionalTerm):
    kind = 'construction_cost'
    required_keys = ['UNIT_COST']
    allowed_keys = ['UNIT_COST']
    depends_on_state = False

    def evaluate(self, phi, state, params) -> FunctionalValue:
        return eval_construction_cost(phi, float(self.unit_cost))
