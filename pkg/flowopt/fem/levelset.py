"""Zero level set of a nodal P1 field."""
import logging
from dataclasses import dataclass

import numpy as np

from flowopt.exceptions import LevelSetError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LevelSetPolyline:
    """Segments of {phi_h = 0}, with unit normals pointing into {phi_h < 0}.

    ``triangles[i]`` is the triangle segment ``i`` was cut from.
    """
    segments: np.ndarray  # (S, 2, 2)
    outward_normals: np.ndarray  # (S, 2)
    triangles: np.ndarray  # (S,)

    @property
    def lengths(self) -> np.ndarray:
        d = self.segments[:, 1] - self.segments[:, 0]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def length(self) -> float:
        return float(self.lengths.sum())

    def __len__(self):
        return len(self.triangles)


def _values(mesh, phi):
    values = getattr(phi, 'values', phi)
    return mesh.check_field(values, 'phase field')


def extract_zero_level_set(mesh, phi) -> LevelSetPolyline:
    """Piecewise-linear zero level set, at most one segment per triangle.

    A segment lying on a mesh edge is reported once, by the triangle on the positive
    side, and only when the other side is negative or outside the domain. A triangle
    with all three nodal values zero is an error.
    """
    f = _values(mesh, phi)
    ft = f[mesh.triangles]
    candidates = np.flatnonzero((ft.min(axis=1) <= 0.0) & (ft.max(axis=1) >= 0.0))
    grads = np.einsum('tkd,tk->td', mesh.barycentric_gradients, ft)

    segments, normals, owners = [], [], []
    for t in candidates:
        values = ft[t]
        corners = mesh.vertices[mesh.triangles[t]]
        zeros = np.flatnonzero(values == 0.0)
        if zeros.size == 3:
            raise LevelSetError(f'extract_zero_level_set: phase field vanishes on all of triangle {t}')
        if zeros.size == 2:
            third = int(np.setdiff1d(np.arange(3), zeros)[0])
            if values[third] < 0.0:
                continue
            edge = mesh.tri_edges[t, third]
            other = mesh.edge_triangles[edge, 1] if mesh.edge_triangles[edge, 0] == t else mesh.edge_triangles[edge, 0]
            if other >= 0:
                opposite = np.setdiff1d(mesh.triangles[other], mesh.triangles[t])
                if f[opposite[0]] >= 0.0:
                    continue
            points = [corners[zeros[0]], corners[zeros[1]]]
        else:
            points = [corners[k] for k in zeros]
            for i, j in ((0, 1), (1, 2), (2, 0)):
                if values[i] * values[j] < 0.0:
                    s = values[i] / (values[i] - values[j])
                    points.append(corners[i] + s * (corners[j] - corners[i]))
            if len(points) != 2:
                continue
        g = grads[t]
        norm = np.hypot(g[0], g[1])
        segments.append(points)
        normals.append(-g / norm)
        owners.append(t)

    if not segments:
        return LevelSetPolyline(np.zeros((0, 2, 2)), np.zeros((0, 2)), np.zeros(0, dtype=np.int64))
    polyline = LevelSetPolyline(np.array(segments, dtype=float), np.array(normals, dtype=float),
                                np.array(owners, dtype=np.int64))
    logger.debug(f'extract_zero_level_set: {len(polyline)} segments, length {polyline.length:.6f}')
    return polyline


def barycentric(mesh, triangles, points) -> np.ndarray:
    """Barycentric coordinates of ``points`` (N, 2) with respect to ``triangles`` (N,)."""
    grads = mesh.barycentric_gradients[triangles]
    origin = mesh.vertices[mesh.triangles[triangles, 0]]
    bary = np.einsum('nkd,nd->nk', grads, points - origin)
    bary[:, 0] += 1.0
    return bary
