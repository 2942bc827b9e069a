"""Initial phase fields: constant, a ball-shaped object, or a saved field."""
import logging
from pathlib import Path

import numpy as np
from django.core.exceptions import ImproperlyConfigured
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

from flowopt.flow.state import PhaseField
from flowopt.functionals.rocks import clamped_sine

logger = logging.getLogger(__name__)

INITIAL_KINDS = ('constant', 'ball', 'file')


def constant_phase_field(mesh, value: float = 0.0) -> PhaseField:
    if not -1.0 <= value <= 1.0:
        raise ImproperlyConfigured(f'constant_phase_field: VALUE must lie in [-1, 1], got {value}')
    return PhaseField(mesh, np.full(mesh.n_vertices, float(value)))


def ball_phase_field(mesh, center, radius: float, epsilon: float) -> PhaseField:
    """Object (phi = -1) inside the ball, fluid outside, joined by the optimal sine profile of width pi eps."""
    if not radius > 0:
        raise ImproperlyConfigured(f'ball_phase_field: RADIUS must be positive, got {radius}')
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    distance = np.hypot(x - center[0], y - center[1]) - radius
    return PhaseField(mesh, clamped_sine(distance / epsilon))


def load_phase_field(mesh, path) -> PhaseField:
    """Interpolate a field saved by ``save_phase_field`` onto ``mesh``."""
    path = Path(path)
    if not path.exists():
        raise ImproperlyConfigured(f'load_phase_field: {path} does not exist')
    with np.load(path) as data:
        vertices, values = data['vertices'], data['phi']
    if vertices.shape != (len(values), 2):
        raise ImproperlyConfigured(f'load_phase_field: {path} holds {len(values)} values for '
                                   f'{len(vertices)} vertices')
    points = mesh.vertices
    interpolated = LinearNDInterpolator(vertices, values)(points)
    outside = np.isnan(interpolated)
    if outside.any():
        interpolated[outside] = NearestNDInterpolator(vertices, values)(points[outside])
    logger.info(f'load_phase_field: interpolated {len(values)} saved values onto {mesh}')
    return PhaseField(mesh, np.clip(interpolated, -1.0, 1.0))


def save_phase_field(path, phi) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, vertices=phi.mesh.vertices, triangles=phi.mesh.triangles, phi=phi.values)
    return path


def initial_phase_field(config: dict, mesh, epsilon: float) -> PhaseField:
    """Build phi^0 from an INITIAL_PHASE_FIELD entry ``{KIND: ..., OPTIONS: {...}}``."""
    kind = config.get('KIND', 'constant')
    options = {k.lower(): v for k, v in config.get('OPTIONS', {}).items()}
    if kind == 'constant':
        return constant_phase_field(mesh, float(options.get('value', 0.0)))
    if kind == 'ball':
        try:
            return ball_phase_field(mesh, options['center'], float(options['radius']), epsilon)
        except KeyError as err:
            raise ImproperlyConfigured(f'initial_phase_field: ball needs CENTER and RADIUS, missing {err}')
    if kind == 'file':
        if 'path' not in options:
            raise ImproperlyConfigured('initial_phase_field: file needs a PATH')
        return load_phase_field(mesh, options['path'])
    raise ImproperlyConfigured(f'initial_phase_field: unknown KIND {kind!r}; expected one of {INITIAL_KINDS}')
