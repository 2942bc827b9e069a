import abc
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.utils.module_loading import import_string

from flowopt.fem.spaces import taylor_hood

logger = logging.getLogger(__name__)

DEFAULT_FUNCTIONALS = {
    'ginzburg_landau': 'flowopt.functionals.ginzburg_landau.GinzburgLandauTerm',
    'penalty_hat_alpha': 'flowopt.functionals.penalty.HatAlphaPenaltyTerm',
    'surface_force': 'flowopt.functionals.forces.SurfaceForceTerm',
    'volume_drag': 'flowopt.functionals.forces.VolumeDragTerm',
    'potential_power': 'flowopt.functionals.power.PotentialPowerTerm',
    'moreau_yosida': 'flowopt.functionals.power.MoreauYosidaTerm',
    'rock_cost': 'flowopt.functionals.rocks.RockCostTerm',
    'construction_cost': 'flowopt.functionals.rocks.ConstructionCostTerm',
    'least_squares': 'flowopt.functionals.tracking.LeastSquaresTerm',
}


@dataclass
class FunctionalValue:
    """Value of a functional and its partial derivatives as assembled dual vectors.

    ``d_phi_l2`` pairs the L2 part of the phi-derivative with the P1 basis,
    ``d_phi_grad`` pairs the gradient part with the basis gradients. ``d_velocity`` and
    ``d_pressure`` are the state derivatives that feed the adjoint right-hand side.
    """
    value: float
    d_phi_l2: np.ndarray
    d_phi_grad: np.ndarray
    d_velocity: np.ndarray
    d_pressure: np.ndarray

    @classmethod
    def zero(cls, mesh, value=0.0):
        spaces = taylor_hood(mesh)
        return cls(value=float(value), d_phi_l2=np.zeros(spaces.p1.n_dofs), d_phi_grad=np.zeros(spaces.p1.n_dofs),
                   d_velocity=np.zeros(spaces.n_velocity), d_pressure=np.zeros(spaces.n_pressure))

    @property
    def d_phi(self) -> np.ndarray:
        return self.d_phi_l2 + self.d_phi_grad

    @property
    def d_state(self) -> np.ndarray:
        """Derivative with respect to the full state vector (velocity, pressure, multiplier)."""
        return np.concatenate([self.d_velocity, self.d_pressure, [0.0]])

    def scaled(self, factor: float) -> 'FunctionalValue':
        return FunctionalValue(value=factor * self.value, d_phi_l2=factor * self.d_phi_l2,
                               d_phi_grad=factor * self.d_phi_grad, d_velocity=factor * self.d_velocity,
                               d_pressure=factor * self.d_pressure)

    def __add__(self, other: 'FunctionalValue') -> 'FunctionalValue':
        return FunctionalValue(value=self.value + other.value, d_phi_l2=self.d_phi_l2 + other.d_phi_l2,
                               d_phi_grad=self.d_phi_grad + other.d_phi_grad,
                               d_velocity=self.d_velocity + other.d_velocity,
                               d_pressure=self.d_pressure + other.d_pressure)


def get_default_functional_registry() -> dict:
    """Objective kinds configured in settings.py FLOWOPT_FUNCTIONALS, over the built-in defaults."""
    registry = dict(DEFAULT_FUNCTIONALS)
    registry.update(getattr(settings, 'FLOWOPT_FUNCTIONALS', {}))
    return registry


def get_functional_terms(term_configs: list, registry: dict = None) -> list:
    """Return the FunctionalTerms configured in the given list of configuration dictionaries.

    Each dictionary has a KIND (looked up in the registry) or an explicit NAME (dotted
    path of a FunctionalTerm subclass), an optional WEIGHT and an OPTIONS dictionary.
    """
    registry = registry if registry is not None else get_default_functional_registry()
    terms = []
    for term_config in term_configs:
        label = term_config.get('NAME', term_config.get('KIND'))
        if not term_config.get('ACTIVE', True):
            logger.debug(f'get_functional_terms - ignoring inactive term: {label}')
            continue
        dotted_path = term_config.get('NAME') or registry.get(term_config.get('KIND'))
        if dotted_path is None:
            raise ImproperlyConfigured(
                f'Unknown objective KIND: {term_config.get("KIND")}; known kinds are {sorted(registry)}')
        try:
            klass = import_string(dotted_path)
        except ImportError:
            msg = (
                f'The objective term class: {dotted_path} could not be imported. '
                f'Check the FLOWOPT_FUNCTIONALS setting and the OBJECTIVE of your problem document.'
            )
            raise ImproperlyConfigured(msg)
        term: FunctionalTerm = klass(weight=term_config.get('WEIGHT', 1.0), **term_config.get('OPTIONS', {}))
        terms.append(term)
    return terms


class FunctionalTerm(abc.ABC):
    """Base class for the objective terms.

    * kwargs to __init__ are the OPTIONS dictionary of the term's OBJECTIVE entry.
    * allowed_keys and required_keys are class properties of subclasses.
    * The allowed_keys are turned into lower-case instance properties in __init__.
    * Missing required_keys result in an ImproperlyConfigured Django exception.

    Subclasses implement ``evaluate(phi, state, params)`` returning the unweighted
    FunctionalValue; ``__call__`` applies the weight.
    """
    kind = None
    required_keys = []
    allowed_keys = []
    # terms without state dependence skip the adjoint coupling
    depends_on_state = True

    def __init__(self, weight=1.0, **kwargs) -> None:
        super().__init__()
        self.weight = float(weight)

        # filter the kwargs by allowed keys and add them as properties to the term instance
        self.__dict__.update((k.lower(), v) for k, v in kwargs.items() if k in self.allowed_keys)
        ignored = set(kwargs) - set(self.allowed_keys)
        if ignored:
            logger.debug(f'{self._get_term_classname()}: ignoring unknown OPTIONS keys {sorted(ignored)}')

        missing_keys = set(self.required_keys) - set(kwargs.keys())
        if missing_keys:
            msg = (
                f'The following required keys are missing from the configuration OPTIONS of '
                f'{self._get_term_classname()}: {list(missing_keys)} ; '
                f'These keys were found: {list(kwargs.keys())} ; '
                f'Check the OBJECTIVE of your problem document.'
            )
            raise ImproperlyConfigured(msg)
        self.validate()
        self._mesh_data = {}

    def __repr__(self):
        return f'{self._get_term_classname()}(weight={self.weight})'

    def _get_term_classname(self) -> str:
        return type(self).__qualname__

    def validate(self):
        """Check option values; raise ImproperlyConfigured."""

    def validate_domain(self, width: float, height: float):
        """Check options that depend on the domain geometry."""

    def mesh_data(self, mesh, build):
        """Per-mesh data (extension fields, weights at quadrature points), built on first use."""
        key = id(mesh)
        if key not in self._mesh_data or self._mesh_data[key][0] is not mesh:
            self._mesh_data = {key: (mesh, build(mesh))}
        return self._mesh_data[key][1]

    @abc.abstractmethod
    def evaluate(self, phi, state, params) -> FunctionalValue:
        pass

    def __call__(self, phi, state, params) -> FunctionalValue:
        value = self.evaluate(phi, state, params)
        return value if self.weight == 1.0 else value.scaled(self.weight)


def unit_vector(vector, name, owner):
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (2,) or abs(np.linalg.norm(vector) - 1.0) > 1e-12:
        raise ImproperlyConfigured(f'{owner}: {name} must be a unit vector in the plane, got {vector.tolist()}')
    return vector
