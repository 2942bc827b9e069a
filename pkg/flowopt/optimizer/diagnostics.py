import logging

import numpy as np

logger = logging.getLogger(__name__)

ACTIVE_TOLERANCE = 1e-8
RANK_TOLERANCE = 1e-10


def constraint_qualification_diagnostic(phi, state, constraints, params=None, n_samples: int = None,
                                        seed: int = 0) -> dict:
    """Sampled evidence that phi is a regular point of the active constraints.

    Random box-feasible psi give admissible directions psi - phi; the matrix of
    active-constraint derivatives applied to them should have full row rank. This is
    a heuristic check, not a proof.
    """
    rows, names = [], []
    for spec in constraints:
        value = spec.evaluate(phi, state, params)
        if spec.relation == 'equality' or abs(value.value) <= ACTIVE_TOLERANCE:
            rows.append(value.d_phi)
            names.append(spec.name)
    report = {'active': names, 'samples': 0, 'rank': 0, 'singular_values': [], 'condition': 1.0,
              'regular': True}
    if not rows:
        logger.debug('constraint_qualification_diagnostic: no active constraints')
        return report

    n_samples = n_samples or len(rows) + 4
    rng = np.random.default_rng(seed)
    directions = rng.uniform(-1.0, 1.0, size=(n_samples, phi.values.size)) - phi.values[None, :]
    matrix = np.array(rows) @ directions.T
    singular = np.linalg.svd(matrix, compute_uv=False)
    rank = int(np.sum(singular > RANK_TOLERANCE * max(singular.max(initial=0.0), np.finfo(float).tiny)))
    condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else float('inf')
    report.update(samples=n_samples, rank=rank, singular_values=singular.tolist(), condition=condition,
                  regular=rank == len(rows))
    if not report['regular']:
        logger.warning(f'constraint_qualification_diagnostic: active constraint derivatives have rank {rank} '
                       f'< {len(rows)} ({names})')
    return report
