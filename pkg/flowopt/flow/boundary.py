"""Boundary velocity profiles and their Dirichlet data on the P2 velocity space.

Profiles are plain functions ``profile(x, y, **options) -> (gx, gy)``. Problem
documents name them by dotted path, the same way handlers are wired up elsewhere
in the settings, and ``resolve_profile`` binds the OPTIONS.
"""
import functools
import logging
from dataclasses import dataclass

import numpy as np
from django.core.exceptions import ImproperlyConfigured
from django.utils.module_loading import import_string

from flowopt.exceptions import BoundaryDataError
from flowopt.fem.mesh import BOUNDARY_TAGS

logger = logging.getLogger(__name__)

FLUX_TOLERANCE = 1e-10


def zero(x, y):
    return np.zeros_like(x), np.zeros_like(x)


def uniform_flow(x, y, velocity=(1.0, 0.0)):
    return np.full_like(x, velocity[0], dtype=float), np.full_like(x, velocity[1], dtype=float)


def poiseuille(x, y, lower=0.0, upper=1.0, amplitude=1.0, direction=(1.0, 0.0), axis='y'):
    """Parabola amplitude * (s - lower)(upper - s) across the channel coordinate s."""
    s = y if axis == 'y' else x
    profile = amplitude * (s - lower) * (upper - s)
    return direction[0] * profile, direction[1] * profile


def windowed_parabola(x, y, center=0.5, half_width=0.5, amplitude=1.0, direction=(1.0, 0.0), axis='y'):
    """amplitude * max(1 - ((s - center) / half_width)^2, 0) along ``direction``."""
    s = y if axis == 'y' else x
    profile = amplitude * np.maximum(1.0 - ((s - center) / half_width) ** 2, 0.0)
    return direction[0] * profile, direction[1] * profile


def resolve_profile(config: dict):
    """Turn ``{'NAME': dotted.path, 'OPTIONS': {...}}`` into a callable."""
    try:
        func = import_string(config['NAME'])
    except KeyError:
        raise ImproperlyConfigured(f'Boundary profile configuration has no NAME: {config}')
    except ImportError:
        msg = (
            f'The boundary profile (the value of the NAME key): {config["NAME"]} could not be imported. '
            f'Check the BOUNDARY_DATA of your problem document.'
        )
        raise ImproperlyConfigured(msg)
    options = {k.lower(): v for k, v in config.get('OPTIONS', {}).items()}
    return functools.partial(func, **options)


@dataclass
class DirichletData:
    dofs: np.ndarray
    values: np.ndarray
    flux: float
    outflow_scale: float = 1.0

    def lifted(self, n_dofs: int) -> np.ndarray:
        u = np.zeros(n_dofs)
        u[self.dofs] = self.values
        return u


def boundary_nodes(space, tag: str):
    """P2 nodes on the boundary segment ``tag``: its vertices and edge midpoints."""
    mesh = space.mesh
    edges = mesh.edges_with_tag(tag)
    nodes = np.concatenate([mesh.edges[edges].ravel(), mesh.n_vertices + edges])
    return np.unique(nodes)


def segment_flux(space, tag: str, values: np.ndarray) -> float:
    """Outward flux of the P2 trace of ``values`` through one boundary segment (Simpson, exact)."""
    mesh = space.mesh
    n_s = space.n_scalar
    normal = {'bottom': (0.0, -1.0), 'right': (1.0, 0.0), 'top': (0.0, 1.0), 'left': (-1.0, 0.0)}[tag]
    edges = mesh.edges_with_tag(tag)
    a, b = mesh.edges[edges, 0], mesh.edges[edges, 1]
    m = mesh.n_vertices + edges
    un = values[:n_s] * normal[0] + values[n_s:] * normal[1]
    return float(np.sum(mesh.edge_lengths[edges] / 6.0 * (un[a] + 4.0 * un[m] + un[b])))


def dirichlet_data(space, boundary_data: dict, rescale_outflow: bool = False) -> DirichletData:
    """Nodal Dirichlet data of the velocity space for every boundary segment.

    Missing profiles for a tagged segment are an error. With ``rescale_outflow`` the
    segments with positive outflow are scaled so the discrete flux balances.
    """
    mesh = space.mesh
    if np.any(mesh.edge_tags == -1):
        raise BoundaryDataError('dirichlet_data: mesh has untagged boundary edges')
    values = np.zeros(space.n_dofs)
    n_s = space.n_scalar
    all_nodes = []
    tags = [tag for tag in BOUNDARY_TAGS if mesh.edges_with_tag(tag).size]
    missing = [tag for tag in tags if tag not in boundary_data]
    if missing:
        raise BoundaryDataError(f'dirichlet_data: no boundary profile for segment(s) {missing}')

    per_tag = {}
    for tag in tags:
        nodes = boundary_nodes(space, tag)
        gx, gy = boundary_data[tag](space.coords[nodes, 0], space.coords[nodes, 1])
        per_tag[tag] = (nodes, np.broadcast_to(gx, nodes.shape), np.broadcast_to(gy, nodes.shape))
        all_nodes.append(nodes)

    # corners are shared by two segments; later tags in BOUNDARY_TAGS order win
    for tag in tags:
        nodes, gx, gy = per_tag[tag]
        values[nodes] = gx
        values[n_s + nodes] = gy

    fluxes = {tag: segment_flux(space, tag, values) for tag in tags}
    flux = sum(fluxes.values())
    scale = 1.0
    if rescale_outflow and abs(flux) > FLUX_TOLERANCE:
        outflow = sum(f for f in fluxes.values() if f > 0)
        inflow = sum(f for f in fluxes.values() if f < 0)
        if outflow <= 0:
            raise BoundaryDataError('dirichlet_data: cannot rescale outflow, no segment has positive flux')
        scale = -inflow / outflow
        for tag in tags:
            if fluxes[tag] > 0:
                nodes = per_tag[tag][0]
                values[nodes] *= scale
                values[n_s + nodes] *= scale
        flux = sum(segment_flux(space, tag, values) for tag in tags)
        logger.info(f'dirichlet_data: outflow segments rescaled by {scale:.6f} to balance the flux')

    nodes = np.unique(np.concatenate(all_nodes)) if all_nodes else np.zeros(0, dtype=np.int64)
    dofs = np.concatenate([nodes, n_s + nodes])
    return DirichletData(dofs=dofs, values=values[dofs], flux=flux, outflow_scale=scale)
