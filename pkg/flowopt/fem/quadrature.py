"""Symmetric quadrature rules on the reference triangle.

Points are barycentric, weights sum to the reference area 1/2.
"""
import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (Q, 3) barycentric
    weights: np.ndarray  # (Q,)
    degree: int

    @property
    def size(self) -> int:
        return self.weights.size


def _orbit(*coords):
    """All distinct permutations of a barycentric point, in a fixed order."""
    seen = []
    for perm in itertools.permutations(coords):
        if perm not in seen:
            seen.append(perm)
    return seen


def _rule(degree, groups):
    points, weights = [], []
    for weight, coords in groups:
        orbit = _orbit(*coords)
        points.extend(orbit)
        weights.extend([weight] * len(orbit))
    return QuadratureRule(points=np.array(points, dtype=float),
                          weights=0.5 * np.array(weights, dtype=float),
                          degree=degree)


# Dunavant rules, weights normalized to unit reference area before the 1/2 above.
_RULES = {
    1: _rule(1, [(1.0, (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0))]),
    2: _rule(2, [(1.0 / 3.0, (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0))]),
    4: _rule(4, [
        (0.223381589678011, (0.108103018168070, 0.445948490915965, 0.445948490915965)),
        (0.109951743655322, (0.816847572980459, 0.091576213509771, 0.091576213509771)),
    ]),
    6: _rule(6, [
        (0.116786275726379, (0.501426509658179, 0.249286745170910, 0.249286745170910)),
        (0.050844906370207, (0.873821971016996, 0.063089014491502, 0.063089014491502)),
        (0.082851075618374, (0.053145049844817, 0.310352451033784, 0.636502499121399)),
    ]),
}

DEFAULT_DEGREE = 6


def get_rule(degree: int = DEFAULT_DEGREE) -> QuadratureRule:
    """Return the cheapest rule exact for polynomials of the given degree."""
    for available in sorted(_RULES):
        if available >= degree:
            return _RULES[available]
    raise ValueError(f'get_rule: no quadrature rule of degree {degree} (max {max(_RULES)})')


def gauss_legendre_segment(n: int = 2):
    """Gauss points on [0, 1] with weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
