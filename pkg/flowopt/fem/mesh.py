"""Conforming triangulations of rectangles with newest-vertex bisection.

Triangles are stored counterclockwise as ``(a, b, c)``: the edge ``(a, b)`` is the
refinement edge and ``c`` the newest vertex. Local edge ``k`` of a triangle is the
edge opposite local vertex ``k``, so ``tri_edges[:, 2]`` holds the refinement edges.
"""
import logging
from functools import cached_property

import numpy as np

from flowopt.exceptions import MeshError

logger = logging.getLogger(__name__)

BOUNDARY_TAGS = ('bottom', 'right', 'top', 'left')
INTERIOR = -2
UNTAGGED = -1


class Mesh:
    """An immutable triangulation with edge topology and boundary tags.

    Boundary edges are tagged by the side of the bounding box they lie on; this is
    exact for the rectangular domains generated here and survives refinement.
    """

    def __init__(self, vertices, triangles, generation=None, parent_vertices=None):
        vertices = np.array(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError(f'Mesh: vertices must have shape (N, 2), got {vertices.shape}')
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError(f'Mesh: triangles must have shape (T, 3), got {triangles.shape}')
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshError('Mesh: triangle vertex index out of range')

        self.vertices = vertices
        self.triangles = triangles
        self.generation = (np.zeros(len(triangles), dtype=np.int64) if generation is None
                           else np.array(generation, dtype=np.int64))
        self.parent_vertices = None if parent_vertices is None else np.array(parent_vertices, dtype=np.int64)

        self.signed_areas = self._signed_areas()
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.flatnonzero(self.signed_areas <= 0.0)[0])
            raise MeshError(f'Mesh: triangle {bad} has nonpositive signed area {self.signed_areas[bad]:.3e}')

        self._build_edges()
        self._tag_boundary()

        for array in (self.vertices, self.triangles, self.generation, self.signed_areas,
                      self.edges, self.tri_edges, self.edge_triangles, self.edge_tags):
            array.flags.writeable = False
        # spaces and per-mesh data attached by other modules
        self.cache = {}

    def __repr__(self):
        return f'Mesh(vertices={self.n_vertices}, triangles={self.n_triangles}, edges={self.n_edges})'

    # -- construction helpers

    def _signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def _build_edges(self):
        t = self.triangles
        local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
        local = np.sort(local, axis=1)
        edges, inverse = np.unique(local, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        counts = np.bincount(inverse, minlength=len(edges))
        if np.any(counts > 2):
            raise MeshError('Mesh: an edge is shared by more than two triangles')

        owners = np.repeat(np.arange(len(t)), 3)
        order = np.argsort(inverse, kind='stable')
        starts = np.searchsorted(inverse[order], np.arange(len(edges)))
        edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_triangles[:, 0] = owners[order][starts]
        shared = counts == 2
        edge_triangles[shared, 1] = owners[order][starts[shared] + 1]

        self.edges = edges.astype(np.int64)
        self.tri_edges = inverse.reshape(-1, 3).astype(np.int64)
        self.edge_triangles = edge_triangles

    def _tag_boundary(self):
        tags = np.full(len(self.edges), INTERIOR, dtype=np.int64)
        boundary = self.edge_triangles[:, 1] < 0
        tags[boundary] = UNTAGGED
        xmin, xmax, ymin, ymax = self.bounds
        tol = 1e-10 * max(xmax - xmin, ymax - ymin, 1.0)
        mid = 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])
        p, q = self.vertices[self.edges[:, 0]], self.vertices[self.edges[:, 1]]
        on_side = {
            0: (np.abs(p[:, 1] - ymin) <= tol) & (np.abs(q[:, 1] - ymin) <= tol),
            1: (np.abs(p[:, 0] - xmax) <= tol) & (np.abs(q[:, 0] - xmax) <= tol),
            2: (np.abs(p[:, 1] - ymax) <= tol) & (np.abs(q[:, 1] - ymax) <= tol),
            3: (np.abs(p[:, 0] - xmin) <= tol) & (np.abs(q[:, 0] - xmin) <= tol),
        }
        for tag, mask in on_side.items():
            tags[boundary & mask] = tag
        self.edge_tags = tags
        self._edge_midpoints = mid

    # -- sizes and geometry

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def bounds(self):
        xmin, ymin = self.vertices.min(axis=0)
        xmax, ymax = self.vertices.max(axis=0)
        return float(xmin), float(xmax), float(ymin), float(ymax)

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def area(self) -> float:
        return float(np.sum(self.signed_areas))

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def edge_midpoints(self) -> np.ndarray:
        return self._edge_midpoints

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """(T, 3, 2) gradients of the barycentric coordinates on each triangle."""
        p = self.vertices[self.triangles]
        x, y = p[..., 0], p[..., 1]
        det = 2.0 * self.signed_areas
        grads = np.empty((self.n_triangles, 3, 2))
        grads[:, 0, 0] = (y[:, 1] - y[:, 2]) / det
        grads[:, 0, 1] = (x[:, 2] - x[:, 1]) / det
        grads[:, 1, 0] = (y[:, 2] - y[:, 0]) / det
        grads[:, 1, 1] = (x[:, 0] - x[:, 2]) / det
        grads[:, 2, 0] = (y[:, 0] - y[:, 1]) / det
        grads[:, 2, 1] = (x[:, 1] - x[:, 0]) / det
        return grads

    def min_angle(self) -> float:
        """Smallest interior angle of the mesh, in degrees."""
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum('td,td->t', u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
        return float(np.min(angles))

    # -- topology queries

    @cached_property
    def boundary_edges(self) -> dict:
        """Boundary edge index -> boundary segment tag."""
        indices = np.flatnonzero(self.edge_tags != INTERIOR)
        return {int(e): (BOUNDARY_TAGS[self.edge_tags[e]] if self.edge_tags[e] >= 0 else None) for e in indices}

    @cached_property
    def interior_edges(self) -> dict:
        """Interior edge index -> pair of adjacent triangles."""
        indices = np.flatnonzero(self.edge_tags == INTERIOR)
        return {int(e): (int(self.edge_triangles[e, 0]), int(self.edge_triangles[e, 1])) for e in indices}

    def edges_with_tag(self, tag: str) -> np.ndarray:
        return np.flatnonzero(self.edge_tags == BOUNDARY_TAGS.index(tag))

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.edges[self.edge_tags != INTERIOR])

    def hanging_edges(self) -> np.ndarray:
        """Edges with a single triangle that do not lie on the domain boundary."""
        return np.flatnonzero(self.edge_tags == UNTAGGED)

    def segment_lengths(self) -> dict:
        return {tag: float(self.edge_lengths[self.edges_with_tag(tag)].sum()) for tag in BOUNDARY_TAGS}

    def check_field(self, values, name='field'):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_vertices,):
            raise MeshError(f'{name} has shape {values.shape}; the mesh has {self.n_vertices} vertices')
        return values


def generate_rectangle_mesh(width: float, height: float, nx: int, ny: int) -> Mesh:
    """Criss-cross triangulation of (0, width) x (0, height).

    Each cell is cut along one diagonal, the direction alternating with the parity of
    the cell index, so the mesh is mirror-symmetric about both midlines when nx and ny
    are even. The diagonal is the refinement edge of both halves.
    """
    if width <= 0 or height <= 0:
        raise MeshError(f'generate_rectangle_mesh: dimensions must be positive, got {width} x {height}')
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f'generate_rectangle_mesh: cell counts must be positive integers, got {nx} x {ny}')
    nx, ny = int(nx), int(ny)

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    p00 = j * (nx + 1) + i
    p10 = p00 + 1
    p01 = p00 + nx + 1
    p11 = p01 + 1
    even = (i + j) % 2 == 0

    first = np.where(even[:, None],
                     np.column_stack([p11, p00, p10]),
                     np.column_stack([p10, p01, p00]))
    second = np.where(even[:, None],
                      np.column_stack([p00, p11, p01]),
                      np.column_stack([p01, p10, p11]))
    triangles = np.stack([first, second], axis=1).reshape(-1, 3)

    mesh = Mesh(vertices, triangles)
    logger.debug(f'generate_rectangle_mesh: {width} x {height} with {nx} x {ny} cells -> {mesh}')
    return mesh


def refine_marked(mesh: Mesh, marked) -> Mesh:
    """Newest-vertex bisection of the marked triangles plus closure.

    Every marked triangle is bisected at least once; neighbours are bisected as needed
    to keep the mesh free of hanging nodes. New vertices are appended after the old ones
    and ``parent_vertices`` records the edge each vertex was created on.
    """
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked, dtype=np.int64))
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.n_triangles):
        raise MeshError(f'refine_marked: triangle index out of range [0, {mesh.n_triangles})')
    if marked.size == 0:
        return mesh

    ref_edge = mesh.tri_edges[:, 2]
    edge_marked = np.zeros(mesh.n_edges, dtype=bool)
    edge_marked[ref_edge[marked]] = True
    while True:
        touched = edge_marked[mesh.tri_edges].any(axis=1)
        pending = touched & ~edge_marked[ref_edge]
        if not pending.any():
            break
        edge_marked[ref_edge[pending]] = True

    split = np.flatnonzero(edge_marked)
    midpoint = np.full(mesh.n_edges, -1, dtype=np.int64)
    midpoint[split] = mesh.n_vertices + np.arange(split.size)
    new_vertices = 0.5 * (mesh.vertices[mesh.edges[split, 0]] + mesh.vertices[mesh.edges[split, 1]])
    vertices = np.vstack([mesh.vertices, new_vertices])
    parents = np.vstack([np.column_stack([np.arange(mesh.n_vertices)] * 2), mesh.edges[split]])

    a, b, c = mesh.triangles.T
    e_bc, e_ca, e_ab = mesh.tri_edges.T
    gen = mesh.generation
    m_ab, m_ca, m_bc = edge_marked[e_ab], edge_marked[e_ca], edge_marked[e_bc]
    m = midpoint[e_ab]
    m1 = midpoint[e_ca]
    m2 = midpoint[e_bc]

    pieces, generations = [], []

    def add(mask, tri, level):
        pieces.append(np.column_stack(tri)[mask])
        generations.append(gen[mask] + level)

    add(~m_ab, (a, b, c), 0)
    # child (c, a, m), bisected again on (c, a) when that edge is marked
    add(m_ab & ~m_ca, (c, a, m), 1)
    add(m_ab & m_ca, (m, c, m1), 2)
    add(m_ab & m_ca, (a, m, m1), 2)
    # child (b, c, m), bisected again on (b, c)
    add(m_ab & ~m_bc, (b, c, m), 1)
    add(m_ab & m_bc, (m, b, m2), 2)
    add(m_ab & m_bc, (c, m, m2), 2)

    refined = Mesh(vertices, np.vstack(pieces), generation=np.concatenate(generations), parent_vertices=parents)
    logger.debug(f'refine_marked: {marked.size} marked, {split.size} edges bisected -> {refined}')
    return refined


def prolongate(fine: Mesh, values) -> np.ndarray:
    """Transfer nodal P1 values from the parent mesh of ``fine`` by linear interpolation."""
    if fine.parent_vertices is None:
        raise MeshError('prolongate: mesh was not produced by refinement')
    values = np.asarray(values, dtype=float)
    n_parent = int(np.sum(fine.parent_vertices[:, 0] == fine.parent_vertices[:, 1]))
    if values.shape[0] != n_parent:
        raise MeshError(f'prolongate: field has {values.shape[0]} values, parent mesh has {n_parent} vertices')
    return 0.5 * (values[fine.parent_vertices[:, 0]] + values[fine.parent_vertices[:, 1]])


def uniform_refine(mesh: Mesh, times: int = 1) -> Mesh:
    for _ in range(times):
        mesh = refine_marked(mesh, np.arange(mesh.n_triangles))
    return mesh


def mesh_statistics(mesh: Mesh) -> dict:
    """Counts, area, Taylor-Hood dof counts, minimum angle and boundary segment lengths."""
    p2 = mesh.n_vertices + mesh.n_edges
    xmin, xmax, ymin, ymax = mesh.bounds
    return {
        'vertices': mesh.n_vertices,
        'triangles': mesh.n_triangles,
        'edges': mesh.n_edges,
        'bounds': [float(xmin), float(xmax), float(ymin), float(ymax)],
        'area': mesh.area,
        'phase_field_dofs': mesh.n_vertices,
        'velocity_dofs': 2 * p2,
        'pressure_dofs': mesh.n_vertices,
        'min_angle': mesh.min_angle(),
        'max_generation': int(mesh.generation.max(initial=0)),
        'segment_lengths': mesh.segment_lengths(),
    }
