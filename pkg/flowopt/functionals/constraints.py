"""Integral constraints G_i(phi) = 0 (equality) or G_i(phi) >= 0 (inequality).

The volume, mass and center-of-mass constraints are affine in phi; the optimizer
enforces them in its projection through ``linear_form``. The potential power cap
depends on the state and is only monitored.
"""
import abc
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.utils.module_loading import import_string

from flowopt.fem.assembly import assemble_load
from flowopt.fem.spaces import taylor_hood
from flowopt.functionals.base import FunctionalValue
from flowopt.functionals.power import eval_potential_power

logger = logging.getLogger(__name__)

RELATIONS = ('equality', 'inequality')

DEFAULT_CONSTRAINTS = {
    'volume_lower': 'flowopt.functionals.constraints.VolumeLowerConstraint',
    'volume_upper': 'flowopt.functionals.constraints.VolumeUpperConstraint',
    'mass': 'flowopt.functionals.constraints.MassConstraint',
    'center_of_mass': 'flowopt.functionals.constraints.CenterOfMassConstraint',
    'potential_power_cap': 'flowopt.functionals.constraints.PotentialPowerCapConstraint',
}


def get_default_constraint_registry() -> dict:
    registry = dict(DEFAULT_CONSTRAINTS)
    registry.update(getattr(settings, 'FLOWOPT_CONSTRAINTS', {}))
    return registry


def get_constraint_specs(constraint_configs: list, registry: dict = None) -> list:
    """Return the ConstraintSpecs configured in the given list of configuration dictionaries.

    A center_of_mass entry without a COMPONENT option yields one constraint per axis.
    """
    registry = registry if registry is not None else get_default_constraint_registry()
    specs = []
    for config in constraint_configs:
        kind = config.get('KIND')
        if not config.get('ACTIVE', True):
            logger.debug(f'get_constraint_specs - ignoring inactive constraint: {kind}')
            continue
        dotted_path = config.get('NAME') or registry.get(kind)
        if dotted_path is None:
            raise ImproperlyConfigured(f'Unknown constraint KIND: {kind}; known kinds are {sorted(registry)}')
        try:
            klass = import_string(dotted_path)
        except ImportError:
            msg = (
                f'The constraint class: {dotted_path} could not be imported. '
                f'Check the FLOWOPT_CONSTRAINTS setting and the CONSTRAINTS of your problem document.'
            )
            raise ImproperlyConfigured(msg)
        options = dict(config.get('OPTIONS', {}))
        if getattr(klass, 'per_component', False) and 'COMPONENT' not in options:
            specs.extend(klass(**options, COMPONENT=k) for k in range(2))
        else:
            specs.append(klass(**options))
    return specs


class ConstraintSpec(abc.ABC):
    """Base class for the integral constraints; OPTIONS handling as for FunctionalTerm."""
    kind = None
    relation = 'inequality'
    required_keys = []
    allowed_keys = []
    # affine in phi and enforced by the projection
    enforce = True

    def __init__(self, **kwargs) -> None:
        super().__init__()
        self.__dict__.update((k.lower(), v) for k, v in kwargs.items() if k in self.allowed_keys)
        missing_keys = set(self.required_keys) - set(kwargs.keys())
        if missing_keys:
            msg = (
                f'The following required keys are missing from the configuration OPTIONS of '
                f'{self._get_constraint_classname()}: {list(missing_keys)} ; '
                f'These keys were found: {list(kwargs.keys())} ; '
                f'Check the CONSTRAINTS of your problem document.'
            )
            raise ImproperlyConfigured(msg)
        if self.relation not in RELATIONS:
            raise ImproperlyConfigured(f'{self._get_constraint_classname()}: RELATION must be one of {RELATIONS}')
        self.validate()

    def __repr__(self):
        return f'{self._get_constraint_classname()}({self.name}, {self.relation})'

    def _get_constraint_classname(self) -> str:
        return type(self).__qualname__

    @property
    def name(self) -> str:
        return self.kind

    def validate(self):
        pass

    def validate_domain(self, width: float, height: float):
        pass

    def linear_form(self, mesh):
        """(w, c) with G(phi) = w . phi + c for nodal P1 phi; None if G is not affine."""
        return None

    def evaluate(self, phi, state, params) -> FunctionalValue:
        w, c = self.linear_form(phi.mesh)
        result = FunctionalValue.zero(phi.mesh, float(w @ phi.values + c))
        result.d_phi_l2 = w.copy()
        return result

    def is_satisfied(self, value: float, tol: float = 1e-10) -> bool:
        return abs(value) <= tol if self.relation == 'equality' else value >= -tol


def eval_constraint(spec: ConstraintSpec, phi, state=None, params=None) -> FunctionalValue:
    return spec.evaluate(phi, state, params)


def _check_fraction(owner, beta):
    if not -1.0 < beta < 1.0:
        raise ImproperlyConfigured(f'{owner}: BETA must lie in (-1, 1), got {beta}')
    return float(beta)


def _ones_load(mesh):
    """(1, psi_i), cached on the mesh."""
    if 'p1_ones' not in mesh.cache:
        mesh.cache['p1_ones'] = assemble_load(taylor_hood(mesh).p1, 1.0)
    return mesh.cache['p1_ones']


class _VolumeConstraint(ConstraintSpec):
    """Shared options: BETA, a fraction of |Omega|, or VOLUME, the bound on the integral itself."""
    allowed_keys = ['BETA', 'VOLUME']
    beta = None
    volume = None

    def validate(self):
        if (self.beta is None) == (self.volume is None):
            raise ImproperlyConfigured(f'{self._get_constraint_classname()}: give exactly one of BETA and VOLUME')
        if self.beta is not None:
            self.beta = _check_fraction(self._get_constraint_classname(), self.beta)
        else:
            self.volume = float(self.volume)

    def validate_domain(self, width, height):
        area = width * height
        if self.volume is not None and not -area < self.volume < area:
            raise ImproperlyConfigured(f'{self._get_constraint_classname()}: VOLUME {self.volume} must lie in '
                                       f'(-{area}, {area})')

    def bound(self, area: float) -> float:
        """The bound on the integral of phi for a domain of the given area."""
        return self.beta * area if self.beta is not None else self.volume


class VolumeLowerConstraint(_VolumeConstraint):
    """integral of phi >= bound: enough fluid."""
    kind = 'volume_lower'

    def linear_form(self, mesh):
        return _ones_load(mesh), -self.bound(mesh.area)


class VolumeUpperConstraint(_VolumeConstraint):
    """integral of phi <= bound: a minimal object size."""
    kind = 'volume_upper'

    def linear_form(self, mesh):
        return -_ones_load(mesh), self.bound(mesh.area)


class MassConstraint(ConstraintSpec):
    """M - integral of 1/2 rho (1 - phi) >= 0: the object mass is at most MASS.

    RELATION: equality pins the mass instead.
    """
    kind = 'mass'
    required_keys = ['MASS']
    allowed_keys = ['MASS', 'DENSITY', 'RELATION']
    density = 1.0

    def validate(self):
        if not self.mass > 0:
            raise ImproperlyConfigured(f'{self._get_constraint_classname()}: MASS must be positive, got {self.mass}')
        if not self.density > 0:
            raise ImproperlyConfigured(f'{self._get_constraint_classname()}: DENSITY must be positive')

    def linear_form(self, mesh):
        rho = float(self.density)
        return 0.5 * rho * _ones_load(mesh), float(self.mass) - 0.5 * rho * mesh.area


class CenterOfMassConstraint(ConstraintSpec):
    """integral of 1/2 (1 - phi)(x_k - y_k) = 0: the object's centroid sits at CENTER."""
    kind = 'center_of_mass'
    required_keys = ['CENTER']
    allowed_keys = ['CENTER', 'COMPONENT']
    relation = 'equality'
    per_component = True
    component = 0

    def validate(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.center.shape != (2,):
            raise ImproperlyConfigured(f'{self._get_constraint_classname()}: CENTER must be a point [x, y]')
        if self.component not in (0, 1):
            raise ImproperlyConfigured(f'{self._get_constraint_classname()}: COMPONENT must be 0 or 1')

    def validate_domain(self, width, height):
        x, y = self.center
        if not (0.0 < x < width and 0.0 < y < height):
            raise ImproperlyConfigured(f'{self._get_constraint_classname()}: CENTER {self.center.tolist()} '
                                       f'is not interior to (0, {width}) x (0, {height})')

    @property
    def name(self) -> str:
        return f'{self.kind}_{"xy"[self.component]}'

    def linear_form(self, mesh):
        key = ('p1_moment', self.component, float(self.center[self.component]))
        if key not in mesh.cache:
            k, y_k = self.component, float(self.center[self.component])
            moment = assemble_load(taylor_hood(mesh).p1, lambda x, y: (x, y)[k] - y_k)
            mesh.cache[key] = moment
        moment = mesh.cache[key]
        return -0.5 * moment, 0.5 * float(moment.sum())


class PotentialPowerCapConstraint(ConstraintSpec):
    """D - P >= 0 for the potential power P; evaluated and reported, not projected."""
    kind = 'potential_power_cap'
    required_keys = ['D']
    allowed_keys = ['D']
    enforce = False

    def validate(self):
        if not self.d > 0:
            raise ImproperlyConfigured(f'{self._get_constraint_classname()}: D must be positive, got {self.d}')

    def evaluate(self, phi, state, params) -> FunctionalValue:
        if state is None or params is None:
            raise ValueError('PotentialPowerCapConstraint: evaluation needs the flow state and parameters')
        power = eval_potential_power(phi, state, params.mu).scaled(-1.0)
        power.value += float(self.d)
        return power


@dataclass(frozen=True)
class LinearConstraint:
    """weights . zeta = target (equality) or weights . zeta >= target (inequality)."""
    weights: np.ndarray
    target: float
    relation: str = 'equality'
    name: str = ''

    def residual(self, zeta) -> float:
        """G = weights . zeta - target; feasible when 0 (equality) or >= 0."""
        return float(self.weights @ zeta - self.target)


def linear_constraints(specs, mesh) -> list:
    """The enforced constraints of ``specs`` as LinearConstraints on ``mesh``."""
    constraints = []
    for spec in specs:
        if not spec.enforce:
            continue
        form = spec.linear_form(mesh)
        if form is None:
            raise ImproperlyConfigured(f'{spec!r} is enforced but not affine in the phase field')
        w, c = form
        constraints.append(LinearConstraint(weights=w, target=-float(c), relation=spec.relation, name=spec.name))
    return constraints
