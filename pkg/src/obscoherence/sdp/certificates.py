"""Independent recomputation of optimality certificates.

Nothing here reuses the solver's bookkeeping: constraints are densified and
every residual is recomputed from the returned ``x`` and ``dual_y``.
"""
import numpy as np

from .problem import SdpProblem


def check_certificates(problem: SdpProblem, solution) -> dict:
    """Residuals of a claimed primal/dual pair.

    ``primal_feas``  max |Tr(A_k X) - b_k|
    ``dual_feas``    PSD violation of the dual slack built from ``dual_y``
    ``psd_min_eig``  smallest eigenvalue of ``X``
    ``gap``          |dual value - primal value|
    """
    x = np.asarray(solution.x)
    y = np.asarray(solution.dual_y, dtype=float)
    n = problem.n
    x = (x + x.conj().T) / 2
    primal_feas = 0.0
    slack = np.zeros((n, n), dtype=np.complex128)
    for k in range(problem.m):
        a = problem.dense_constraint(k)
        primal_feas = max(primal_feas, abs(float(np.trace(a @ x).real) - problem.b[k]))
        slack += y[k] * a
    c = problem.dense_objective()
    # max: Σ y A - C ⪰ 0 ; min: C - Σ y A ⪰ 0
    slack = slack - c if problem.sense == "max" else c - slack
    slack = (slack + slack.conj().T) / 2
    dual_min = _blockwise_min_eig(problem, slack)
    primal_value = float(np.trace(c @ x).real) + problem.offset
    dual_value = float(problem.b @ y) + problem.offset
    return {
        "primal_feas": primal_feas,
        "dual_feas": max(0.0, -dual_min),
        "psd_min_eig": _blockwise_min_eig(problem, x),
        "primal_value": primal_value,
        "dual_value": dual_value,
        "gap": abs(dual_value - primal_value),
        "off_block_max": _off_block(problem, x),
    }


def _blockwise_min_eig(problem, a):
    vals = []
    for blk in problem.blocks:
        sub = a[blk.start:blk.start + blk.size, blk.start:blk.start + blk.size]
        if blk.diagonal:
            vals.append(float(np.min(np.diag(sub).real)))
        else:
            vals.append(float(np.linalg.eigvalsh(sub)[0]))
    return min(vals)


def _off_block(problem, x):
    mask = np.ones(x.shape, dtype=bool)
    for blk in problem.blocks:
        s, k = blk.start, blk.size
        if blk.diagonal:
            idx = np.arange(s, s + k)
            mask[idx, idx] = False
        else:
            mask[s:s + k, s:s + k] = False
    return float(np.max(np.abs(x[mask]))) if mask.any() else 0.0
