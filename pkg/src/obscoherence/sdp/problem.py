"""Standard-form semidefinite programs over complex Hermitian matrices.

An :class:`SdpProblem` reads::

    maximize    Tr(C X) + offset        (or minimize, with sense="min")
    subject to  Tr(A_k X) = b_k,   k = 1..m
                X ⪰ 0, X block diagonal

``blocks`` follows the SDPA convention: a positive entry is a dense
Hermitian block of that size, a negative entry ``-k`` is a diagonal block of
``k`` nonnegative scalars.  Constraint matrices are stored sparse.
"""
import dataclasses
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph

from ..config import DEFAULT, Tolerances
from ..linalg import ValidationError


class InconsistentConstraintsError(ValidationError):
    """Linearly dependent constraints with incompatible right-hand sides."""


class RankDeficientError(ValidationError):
    """Linearly dependent constraints while dropping is disabled."""


@dataclasses.dataclass(frozen=True)
class Block:
    start: int
    size: int
    diagonal: bool


def _as_sparse(a, n) -> sp.coo_array:
    if sp.issparse(a):
        out = sp.coo_array(a, dtype=np.complex128)
    else:
        out = sp.coo_array(np.asarray(a, dtype=np.complex128))
    if out.shape != (n, n):
        raise ValidationError(f"matrix shape {out.shape} differs from problem dim {n}")
    out.sum_duplicates()
    out.eliminate_zeros()
    return out


class SdpProblem:
    def __init__(self, objective, constraints: Sequence[Tuple[object, float]],
                 blocks: Optional[Sequence[int]] = None, offset: float = 0.0,
                 sense: str = "max", drop_dependent: bool = True,
                 tols: Tolerances = DEFAULT, name: str = ""):
        if sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")
        n = objective.shape[0]
        if blocks is None:
            blocks = [n]
        blocks = [int(x) for x in blocks]
        if any(x == 0 for x in blocks) or sum(abs(x) for x in blocks) != n:
            raise ValidationError(f"block structure {blocks} does not sum to dim {n}")
        self.n = n
        self.name = name
        self.sense = sense
        self.offset = float(offset)
        self.tols = tols
        self.block_sizes = blocks
        self.blocks: List[Block] = []
        start = 0
        for x in blocks:
            self.blocks.append(Block(start, abs(x), x < 0))
            start += abs(x)
        self._block_of = np.empty(n, dtype=np.int64)
        for i, blk in enumerate(self.blocks):
            self._block_of[blk.start:blk.start + blk.size] = i

        self.objective = self._check_matrix(objective, "objective")
        if not np.isfinite(self.offset):
            raise ValidationError("objective offset is not finite")
        mats, rhs = [], []
        for k, (a, b) in enumerate(constraints):
            b = float(np.real(b))
            if not np.isfinite(b):
                raise ValidationError(f"constraint {k}: right-hand side is not finite")
            mats.append(self._check_matrix(a, f"constraint {k}"))
            rhs.append(b)
        self.original_count = len(mats)
        keep, removed = _rank_audit(mats, np.array(rhs), tols.rank)
        if removed and not drop_dependent:
            raise RankDeficientError(f"constraints {removed} are linearly dependent on the others")
        self.removed_rows = removed
        self.constraints = [mats[k] for k in keep]
        self.b = np.array([rhs[k] for k in keep], dtype=float)

    @property
    def m(self) -> int:
        return len(self.constraints)

    def _check_matrix(self, a, what) -> sp.coo_array:
        a = _as_sparse(a, self.n)
        if a.nnz:
            vals = a.data
            if not np.all(np.isfinite(vals)):
                raise ValidationError(f"{what}: non-finite entries")
            herm = (a - a.conj().T).tocoo()
            res = float(np.max(np.abs(herm.data))) if herm.nnz else 0.0
            if res > self.tols.hermitian * (1 + float(np.max(np.abs(vals)))):
                raise ValidationError(f"{what}: not Hermitian (residual {res:.3e})", res)
            bi = self._block_of[a.row]
            bj = self._block_of[a.col]
            bad = bi != bj
            diag_blocks = np.array([blk.diagonal for blk in self.blocks])
            bad |= diag_blocks[bi] & (a.row != a.col)
            if np.any(bad):
                raise ValidationError(f"{what}: entries outside the block structure")
            a = ((a + a.conj().T) / 2).tocoo()
            a.sum_duplicates()
            a.eliminate_zeros()
        return a

    # dense helpers, used by certificates and tests
    def dense_objective(self) -> np.ndarray:
        return self.objective.toarray()

    def dense_constraint(self, k) -> np.ndarray:
        return self.constraints[k].toarray()

    def evaluate(self, x) -> np.ndarray:
        """``Tr(A_k X)`` for every constraint."""
        x = np.asarray(x)
        out = np.empty(self.m)
        for k, a in enumerate(self.constraints):
            out[k] = np.sum(a.data * x[a.col, a.row]).real
        return out

    def objective_value(self, x) -> float:
        c = self.objective
        return float(np.sum(c.data * np.asarray(x)[c.col, c.row]).real) + self.offset

    def adjoint(self, y) -> np.ndarray:
        """``Σ_k y_k A_k`` as a dense matrix."""
        out = np.zeros((self.n, self.n), dtype=np.complex128)
        for yk, a in zip(y, self.constraints):
            np.add.at(out, (a.row, a.col), yk * a.data)
        return out

    def summary(self) -> dict:
        return {"name": self.name, "dim": self.n, "blocks": self.block_sizes,
                "constraints": self.m, "original_constraints": self.original_count,
                "removed_rows": list(self.removed_rows), "sense": self.sense}


def _real_rows(mats) -> sp.csr_array:
    """Each Hermitian constraint as a real vector over (Re, Im) of its entries."""
    rows, cols, vals = [], [], []
    n = mats[0].shape[0] if mats else 0
    for k, a in enumerate(mats):
        idx = a.row * n + a.col
        rows.append(np.full(2 * a.nnz, k))
        cols.append(np.concatenate([2 * idx, 2 * idx + 1]))
        vals.append(np.concatenate([a.data.real, a.data.imag]))
    if not mats:
        return sp.csr_array((0, 0))
    return sp.csr_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(len(mats), 2 * n * n))


def _rank_audit(mats, b, tol) -> Tuple[List[int], List[int]]:
    """Split constraints into a maximal independent subset and the rest.

    Works on the Gram matrix of the constraint functionals, one connected
    component of its sparsity graph at a time (constraints touching disjoint
    entries cannot depend on each other).  Rows are tested in order, so
    earlier constraints are preferred.  Dependent rows whose right-hand side
    is inconsistent raise :class:`InconsistentConstraintsError`.
    """
    m = len(mats)
    if m == 0:
        return [], []
    r = _real_rows(mats)
    gram = (r @ r.T).tocsr()
    scale = max(1.0, float(np.max(np.abs(gram.diagonal()))))
    _, labels = scipy.sparse.csgraph.connected_components(gram, directed=False)
    keep: List[int] = []
    removed: List[int] = []
    diag = gram.diagonal()
    for comp in _components(labels):
        if len(comp) == 1:
            if diag[comp[0]] > tol * scale:
                keep.append(comp[0])
                continue
            g = np.array([[diag[comp[0]]]])
        else:
            g = gram[comp][:, comp].toarray()
        k_loc, r_loc = _audit_dense(g, tol, scale)
        keep.extend(comp[i] for i in k_loc)
        removed.extend(comp[i] for i in r_loc)
        if r_loc:
            bk, br = b[comp[k_loc]], b[comp[r_loc]]
            if k_loc:
                coef = scipy.linalg.solve(g[np.ix_(k_loc, k_loc)], g[np.ix_(k_loc, r_loc)], assume_a="pos")
                pred = coef.T @ bk
            else:
                pred = np.zeros(len(r_loc))
            bad = np.abs(pred - br) > 1e-8 * (1 + np.abs(br))
            if np.any(bad):
                worst = [int(comp[r_loc[i]]) for i in np.flatnonzero(bad)]
                raise InconsistentConstraintsError(
                    f"dependent constraints {worst} have inconsistent right-hand sides")
    return sorted(int(k) for k in keep), sorted(int(k) for k in removed)


def _components(labels):
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    return np.split(order, bounds)


def _audit_dense(gram, tol, scale):
    # incremental Cholesky: row k is dependent if its residual norm^2 vanishes
    m = gram.shape[0]
    keep: List[int] = []
    removed: List[int] = []
    chol = np.zeros((m, m))
    for k in range(m):
        g_kk = gram[k, k]
        if keep:
            ck = _forward(chol, keep, gram[keep, k])
            res = g_kk - float(ck @ ck)
        else:
            ck = np.zeros(0)
            res = g_kk
        if res > tol * scale and res > tol * g_kk:
            idx = len(keep)
            chol[idx, :idx] = ck
            chol[idx, idx] = np.sqrt(res)
            keep.append(k)
        else:
            removed.append(k)
    return keep, removed


def _forward(chol, keep, rhs):
    k = len(keep)
    return scipy.linalg.solve_triangular(chol[:k, :k], rhs, lower=True, check_finite=False)
