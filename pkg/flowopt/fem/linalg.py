"""Dirichlet elimination and the sparse direct solver."""
import logging

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from flowopt.exceptions import SingularSystemError

logger = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-15
RESIDUAL_TOLERANCE = 1e-10


def apply_dirichlet(matrix, rhs, dofs, values):
    """Eliminate prescribed dofs symmetrically.

    Rows and columns of ``dofs`` are replaced by identity rows/columns and the known
    values are moved to the right-hand side. Applying it to its own output changes
    nothing.
    """
    matrix = sparse.csr_matrix(matrix)
    rhs = np.array(rhs, dtype=float)
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
    n = matrix.shape[0]

    lifted = np.zeros(n)
    lifted[dofs] = values
    rhs = rhs - matrix @ lifted
    rhs[dofs] = values

    fixed = np.zeros(n)
    fixed[dofs] = 1.0
    keep = sparse.diags(1.0 - fixed)
    constrained = (keep @ matrix @ keep + sparse.diags(fixed)).tocsr()
    constrained.eliminate_zeros()
    return constrained, rhs


def sparse_solve(matrix, rhs) -> np.ndarray:
    """Solve with SuperLU; zero pivots are reported with the offending dof."""
    A = sparse.csc_matrix(matrix)
    if A.shape[0] != A.shape[1]:
        raise SingularSystemError(f'sparse_solve: matrix is not square: {A.shape}')
    b = np.asarray(rhs, dtype=float)
    try:
        lu = splinalg.splu(A)
    except RuntimeError as err:
        dof = _empty_line(A)
        raise SingularSystemError(f'sparse_solve: factorization failed ({err}); singular dof {dof}', dof=dof) from err

    pivots = np.abs(lu.U.diagonal())
    scale = pivots.max() if pivots.size else 0.0
    small = np.flatnonzero(pivots <= PIVOT_TOLERANCE * max(scale, np.finfo(float).tiny))
    if small.size:
        dof = int(np.argsort(lu.perm_c)[small[0]])
        raise SingularSystemError(f'sparse_solve: zero pivot at dof {dof}', dof=dof)

    x = lu.solve(b)
    residual = np.abs(A @ x - b).max() if b.size else 0.0
    bound = RESIDUAL_TOLERANCE * (sparse_norm_inf(A) * np.abs(x).max() + np.abs(b).max()) if b.size else 0.0
    if residual > bound:
        dof = int(np.argmax(np.abs(A @ x - b)))
        raise SingularSystemError(f'sparse_solve: residual {residual:.3e} exceeds {bound:.3e} at dof {dof}', dof=dof)
    return x


def sparse_norm_inf(A) -> float:
    return float(np.abs(A).sum(axis=1).max()) if A.shape[0] else 0.0


def _empty_line(A):
    """First all-zero row or column, else -1."""
    A = sparse.csr_matrix(A)
    empty_rows = np.flatnonzero(np.diff(A.indptr) == 0)
    if empty_rows.size:
        return int(empty_rows[0])
    empty_cols = np.flatnonzero(np.diff(sparse.csc_matrix(A).indptr) == 0)
    if empty_cols.size:
        return int(empty_cols[0])
    return -1
