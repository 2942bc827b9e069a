"""Legacy ASCII VTK output (unstructured grid of linear triangles)."""
import logging
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

VTK_TRIANGLE = 5


def write_vtk(path, mesh, point_data=None, cell_data=None, title='flowopt'):
    """Write ``mesh`` with nodal and per-triangle fields.

    Arrays of shape (n,) are written as SCALARS, (n, 2) as VECTORS padded with z = 0.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    points = np.column_stack([mesh.vertices, np.zeros(mesh.n_vertices)])
    cells = np.column_stack([np.full(mesh.n_triangles, 3), mesh.triangles])

    with open(path, 'w') as f:
        f.write('# vtk DataFile Version 2.0\n')
        f.write(f'{title}\n')
        f.write('ASCII\n')
        f.write('DATASET UNSTRUCTURED_GRID\n')
        f.write(f'POINTS {mesh.n_vertices} double\n')
        np.savetxt(f, points, fmt='%.17g')
        f.write(f'CELLS {mesh.n_triangles} {4 * mesh.n_triangles}\n')
        np.savetxt(f, cells, fmt='%d')
        f.write(f'CELL_TYPES {mesh.n_triangles}\n')
        np.savetxt(f, np.full((mesh.n_triangles, 1), VTK_TRIANGLE), fmt='%d')
        _write_data(f, 'POINT_DATA', mesh.n_vertices, point_data)
        _write_data(f, 'CELL_DATA', mesh.n_triangles, cell_data)
    logger.debug(f'write_vtk: wrote {path}')
    return path


def _write_data(f, section, size, data):
    if not data:
        return
    f.write(f'{section} {size}\n')
    for name, values in data.items():
        values = np.asarray(values, dtype=float)
        if values.shape[0] != size:
            raise ValueError(f'write_vtk: {name} has {values.shape[0]} entries, expected {size}')
        if values.ndim == 1:
            f.write(f'SCALARS {name} double 1\n')
            f.write('LOOKUP_TABLE default\n')
            np.savetxt(f, values.reshape(-1, 1), fmt='%.17g')
        else:
            f.write(f'VECTORS {name} double\n')
            np.savetxt(f, np.column_stack([values, np.zeros(size)]), fmt='%.17g')
