import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

logger = logging.getLogger(__name__)

HAT_ALPHA_MODES = ('equal_alpha', 'zero')
C0_DOUBLE_OBSTACLE = math.pi / 4.0
C0_DEFAULT = math.pi / 2.0


@dataclass(frozen=True)
class PhysicalParams:
    """Physical and interface parameters of one optimization stage.

    ``boundary_data`` maps a boundary tag to a profile ``g(x, y) -> (gx, gy)``;
    ``body_force`` is ``f(x, y) -> (fx, fy)`` or None for f = 0.
    """
    mu: float
    alpha_bar: float
    epsilon: float
    gamma: float
    c0: float = C0_DEFAULT
    body_force: object = None
    boundary_data: dict = field(default_factory=dict)
    hat_alpha_mode: str = 'equal_alpha'
    rescale_outflow: bool = False

    def __post_init__(self):
        for name in ('mu', 'alpha_bar', 'epsilon', 'gamma', 'c0'):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f'PhysicalParams: {name} must be positive, got {value}')
        if self.hat_alpha_mode not in HAT_ALPHA_MODES:
            raise ValueError(f'PhysicalParams: hat_alpha_mode must be one of {HAT_ALPHA_MODES}')

    def with_epsilon(self, epsilon: float) -> 'PhysicalParams':
        return replace(self, epsilon=epsilon)

    def with_alpha_bar(self, alpha_bar: float) -> 'PhysicalParams':
        return replace(self, alpha_bar=alpha_bar)

    @property
    def gl_scale(self) -> float:
        """gamma / (2 c0), the weight of the Ginzburg-Landau energy."""
        return self.gamma / (2.0 * self.c0)

    def force_at(self, x, y):
        """Body force at points, shape x.shape + (2,)."""
        if self.body_force is None:
            return np.zeros(np.shape(x) + (2,))
        fx, fy = self.body_force(x, y)
        shape = np.shape(x)
        return np.stack([np.broadcast_to(np.asarray(fx, dtype=float), shape),
                         np.broadcast_to(np.asarray(fy, dtype=float), shape)], axis=-1)


def alpha_eps(phi_value, params: PhysicalParams):
    """Brinkman coefficient alpha_bar (1 - phi) / (2 eps), phi clamped to [-1, 1]."""
    phi = np.clip(phi_value, -1.0, 1.0)
    return params.alpha_bar * (1.0 - phi) / (2.0 * params.epsilon)


def alpha_eps_derivative(phi_value, params: PhysicalParams):
    """Derivative of alpha_eps; zero where the clamp is active."""
    phi = np.asarray(phi_value, dtype=float)
    inside = (phi >= -1.0) & (phi <= 1.0)
    return np.where(inside, -params.alpha_bar / (2.0 * params.epsilon), 0.0)


def hat_alpha(phi_value, params: PhysicalParams):
    if params.hat_alpha_mode == 'zero':
        return np.zeros_like(np.asarray(phi_value, dtype=float))
    return alpha_eps(phi_value, params)


def hat_alpha_derivative(phi_value, params: PhysicalParams):
    if params.hat_alpha_mode == 'zero':
        return np.zeros_like(np.asarray(phi_value, dtype=float))
    return alpha_eps_derivative(phi_value, params)
