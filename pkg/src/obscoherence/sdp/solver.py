"""Primal-dual interior point method for :class:`SdpProblem`.

Internally the program is put in the minimisation form

    (P) min <C, X>  s.t. A(X) = b, X ⪰ 0
    (D) max b·y     s.t. A*(y) + Z = C, Z ⪰ 0

and solved with an infeasible-start path-following method using the
Nesterov-Todd scaling and Mehrotra's predictor-corrector.  Each Newton step
reduces to the Schur system ``H dy = r`` with ``H_kl = Tr(A_k W A_l W)``,
which is assembled by :mod:`.kernels` and factored densely.
"""
import dataclasses
import logging
import math
import time
from typing import List, Optional

import numpy as np
import scipy.linalg

from ..config import DEFAULT, Tolerances
from . import kernels
from .problem import SdpProblem

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible-detected"
MAX_ITER = "max-iter"
NUMERICAL = "numerical-failure"


@dataclasses.dataclass(eq=False)
class SdpSolution:
    x: np.ndarray
    dual_y: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    residuals: dict
    status: str
    iterations: int
    z: Optional[np.ndarray] = None
    trace: List[dict] = dataclasses.field(default_factory=list)
    wall_time: float = 0.0
    backend: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def value(self) -> float:
        return self.primal_value

    def bounds(self) -> tuple:
        """(lower, upper) bracket on the optimum implied by the two values."""
        return tuple(sorted((self.primal_value, self.dual_value)))


class _Compiled:
    """Per-block data of a problem in internal (minimisation) form."""

    def __init__(self, p: SdpProblem):
        self.m = p.m
        self.b = p.b.copy()
        self.sign = 1.0 if p.sense == "max" else -1.0
        m = p.m
        if m:
            rows = np.concatenate([a.row for a in p.constraints]).astype(np.int64)
            cols = np.concatenate([a.col for a in p.constraints]).astype(np.int64)
            vals = np.concatenate([a.data for a in p.constraints]).astype(np.complex128)
            cid = np.concatenate([np.full(a.nnz, k, dtype=np.int64) for k, a in enumerate(p.constraints)])
        else:
            rows = cols = cid = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0, dtype=np.complex128)
        cobj = p.objective
        self.sdp = []
        lp_index = []
        for blk in p.blocks:
            if blk.diagonal:
                lp_index.extend(range(blk.start, blk.start + blk.size))
                continue
            s, n = blk.start, blk.size
            mask = (rows >= s) & (rows < s + n)
            r, c, v, k = rows[mask] - s, cols[mask] - s, vals[mask], cid[mask]
            ptr = np.searchsorted(k, np.arange(m + 1)).astype(np.int64)
            active = np.flatnonzero(np.diff(ptr) > 0).astype(np.int64)
            cm = np.zeros((n, n), dtype=np.complex128)
            om = (cobj.row >= s) & (cobj.row < s + n)
            np.add.at(cm, (cobj.row[om] - s, cobj.col[om] - s), cobj.data[om])
            self.sdp.append(dict(start=s, n=n, rows=np.ascontiguousarray(r), cols=np.ascontiguousarray(c),
                                 vals=np.ascontiguousarray(v), cid=k, ptr=ptr, active=active,
                                 C=-self.sign * cm))
        self.lp_index = np.array(lp_index, dtype=np.int64)
        nlp = len(lp_index)
        self.nlp = nlp
        pos = np.full(p.n, -1, dtype=np.int64)
        pos[self.lp_index] = np.arange(nlp)
        self.A_lp = np.zeros((m, nlp))
        lpmask = pos[rows] >= 0 if len(rows) else np.zeros(0, dtype=bool)
        np.add.at(self.A_lp, (cid[lpmask], pos[rows[lpmask]]), vals[lpmask].real)
        self.c_lp = np.zeros(nlp)
        cm_lp = pos[cobj.row] >= 0
        np.add.at(self.c_lp, pos[cobj.row[cm_lp]], cobj.data[cm_lp].real)
        self.c_lp *= -self.sign
        self.ntot = sum(b["n"] for b in self.sdp) + nlp
        self.n = p.n

    # linear maps -------------------------------------------------------------
    def A(self, X, xl):
        out = self.A_lp @ xl if self.nlp else np.zeros(self.m)
        for blk, x in zip(self.sdp, X):
            if len(blk["vals"]):
                w = (blk["vals"] * x[blk["cols"], blk["rows"]]).real
                out = out + np.bincount(blk["cid"], weights=w, minlength=self.m)
        return out

    def At(self, y):
        mats = []
        for blk in self.sdp:
            n = blk["n"]
            mat = np.zeros((n, n), dtype=np.complex128)
            if len(blk["vals"]):
                np.add.at(mat, (blk["rows"], blk["cols"]), blk["vals"] * y[blk["cid"]])
            mats.append(mat)
        return mats, (self.A_lp.T @ y if self.nlp else np.zeros(0))

    def assemble(self, X, xl):
        full = np.zeros((self.n, self.n), dtype=np.complex128)
        for blk, x in zip(self.sdp, X):
            s, n = blk["start"], blk["n"]
            full[s:s + n, s:s + n] = x
        if self.nlp:
            full[self.lp_index, self.lp_index] = xl
        return full


def _inner(A, B):
    return float(np.vdot(A, B).real)


def _herm(a):
    return (a + a.conj().T) / 2


def _max_step(lam, dt):
    """Largest α with diag(lam) + α dt ⪰ 0 (dt Hermitian, lam > 0)."""
    s = 1.0 / np.sqrt(lam)
    mat = _herm(dt * np.outer(s, s))
    lmin = float(np.linalg.eigvalsh(mat)[0])
    return math.inf if lmin >= 0 else -1.0 / lmin


def _max_step_lp(v, dt):
    neg = dt < 0
    return math.inf if not np.any(neg) else float(np.min(-v[neg] / dt[neg]))


def _nt_scaling(x, z):
    """G with W = G G^* the NT point, its inverse, and the scaled eigenvalues."""
    try:
        L = np.linalg.cholesky(x)
        Linv = scipy.linalg.solve_triangular(L, np.eye(len(L)), lower=True)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(x)
        L = v * np.sqrt(np.clip(w, 1e-300, None))
        Linv = np.linalg.inv(L)
    T = _herm(L.conj().T @ z @ L)
    dvals, U = np.linalg.eigh(T)
    dvals = np.clip(dvals, 1e-300, None)
    q = dvals ** -0.25
    G = (L @ U) * q
    Ginv = (U.conj().T / q[:, None]) @ Linv
    return G, Ginv, np.sqrt(dvals)


def _schur_solver(H):
    m = H.shape[0]
    if m == 0:
        return lambda r: r
    try:
        fac = scipy.linalg.cho_factor(H, lower=True, check_finite=False)

        def base(r):
            return scipy.linalg.cho_solve(fac, r, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        # nearly singular late in the run; a tiny shift keeps LU usable
        shift = 1e-14 * max(1.0, float(np.max(np.abs(np.diag(H)))))
        lu = scipy.linalg.lu_factor(H + shift * np.eye(m), check_finite=False)

        def base(r):
            return scipy.linalg.lu_solve(lu, r, check_finite=False)

    def solve(r):
        # one step of iterative refinement
        x = base(r)
        return x + base(r - H @ x)
    return solve


def solve_sdp(problem: SdpProblem, tol_gap: float = None, tol_feas: float = None,
              max_iter: int = None, backend: str = None, tols: Tolerances = None,
              trace: bool = False, verbose: bool = False) -> SdpSolution:
    """Solve ``problem``; never returns a non-optimal point as optimal."""
    tols = tols or problem.tols or DEFAULT
    tol_gap = tols.tol_gap if tol_gap is None else tol_gap
    tol_feas = tols.tol_feas if tol_feas is None else tol_feas
    max_iter = tols.max_iter if max_iter is None else max_iter
    backend = backend or kernels.default_backend()
    if backend not in ("extension", "numpy"):
        raise ValueError(f"unknown kernel backend {backend!r}")
    if backend == "extension" and not kernels.HAVE_EXTENSION:
        raise RuntimeError("compiled kernel requested but the extension is not built")
    t0 = time.perf_counter()
    P = _Compiled(problem)
    m, b, sign = P.m, P.b, P.sign
    ntot = P.ntot

    # starting point
    norms = np.zeros(m)
    for blk in P.sdp:
        if len(blk["vals"]):
            norms += np.bincount(blk["cid"], weights=np.abs(blk["vals"]) ** 2, minlength=m)
    if P.nlp:
        norms += np.sum(P.A_lp ** 2, axis=1)
    norms = np.sqrt(norms)
    cnorm = math.sqrt(sum(np.sum(np.abs(blk["C"]) ** 2) for blk in P.sdp) + float(np.sum(P.c_lp ** 2)))
    ratio = float(np.max((1 + np.abs(b)) / (1 + norms))) if m else 1.0
    xi = max(10.0, math.sqrt(ntot), ntot * ratio)
    eta = max(10.0, math.sqrt(ntot), cnorm, float(np.max(norms)) if m else 0.0)
    X = [xi * np.eye(blk["n"], dtype=np.complex128) for blk in P.sdp]
    Z = [eta * np.eye(blk["n"], dtype=np.complex128) for blk in P.sdp]
    xl = np.full(P.nlp, xi)
    zl = np.full(P.nlp, eta)
    y = np.zeros(m)

    rows = []
    status = MAX_ITER
    stall = 0
    it = 0
    res = {}
    for it in range(max_iter + 1):
        Aty, Atyl = P.At(y)
        Rp = b - P.A(X, xl)
        Rd = [blk["C"] - z - a for blk, z, a in zip(P.sdp, Z, Aty)]
        Rdl = P.c_lp - zl - Atyl
        pobj = sum(_inner(blk["C"], x) for blk, x in zip(P.sdp, X)) + float(P.c_lp @ xl)
        dobj = float(b @ y)
        xz = sum(_inner(x, z) for x, z in zip(X, Z)) + float(xl @ zl)
        mu = xz / ntot
        pinf = float(np.max(np.abs(Rp))) if m else 0.0
        dinf = max([float(np.max(np.abs(r))) for r in Rd] + ([float(np.max(np.abs(Rdl)))] if P.nlp else []))
        primal_user = -sign * pobj + problem.offset
        dual_user = -sign * dobj + problem.offset
        gap = max(abs(pobj - dobj), xz)
        res = dict(primal_feas=pinf, dual_feas=dinf, complementarity=xz)
        row = dict(iter=it, primal=primal_user, dual=dual_user, gap=abs(pobj - dobj),
                   pinf=pinf, dinf=dinf, mu=mu)
        if verbose:
            log.info("it %3d  p %+.10e  d %+.10e  gap %.2e  pinf %.2e  dinf %.2e", it, primal_user,
                     dual_user, gap, pinf, dinf)
        if pinf <= tol_feas and dinf <= tol_feas and gap <= tol_gap * (1 + abs(primal_user)):
            status = OPTIMAL
            rows.append(row)
            break
        big = max([float(np.max(np.abs(x))) for x in X] + [float(np.max(np.abs(xl))) if P.nlp else 0.0])
        if big > 1e13 or (m and float(np.max(np.abs(y))) > 1e13):
            status = INFEASIBLE
            rows.append(row)
            break
        if it == max_iter:
            rows.append(row)
            break

        try:
            with np.errstate(over="raise", invalid="raise"):
                # scaling
                scal = [_nt_scaling(x, z) for x, z in zip(X, Z)]
                Ws = [G @ G.conj().T for G, _, _ in scal]
                vl = np.sqrt(xl * zl)
                wl = np.sqrt(xl / zl)

                H = np.zeros((m, m))
                for blk, W in zip(P.sdp, Ws):
                    if len(blk["active"]):
                        kernels.schur_block(np.ascontiguousarray(W), blk["rows"], blk["cols"], blk["vals"],
                                            blk["ptr"], blk["active"], H, backend=backend)
                if P.nlp:
                    H += (P.A_lp * wl ** 2) @ P.A_lp.T
                solve_h = _schur_solver((H + H.T) / 2)

                WRdW = [W @ r @ W for W, r in zip(Ws, Rd)]
                AWRdW = P.A(WRdW, wl ** 2 * Rdl)

                def direction(Rt, Rtl):
                    GKG = []
                    for (G, _, lam), rt in zip(scal, Rt):
                        K = 2 * rt / (lam[:, None] + lam[None, :])
                        GKG.append(G @ K @ G.conj().T)
                    gkgl = wl * (Rtl / vl) if P.nlp else np.zeros(0)
                    rhs = Rp - P.A(GKG, gkgl) + AWRdW
                    dy = solve_h(rhs) if m else np.zeros(0)
                    Atdy, Atdyl = P.At(dy)
                    dZ = [r - a for r, a in zip(Rd, Atdy)]
                    dZl = Rdl - Atdyl
                    dX = [_herm(gkg - W @ dz @ W) for gkg, W, dz in zip(GKG, Ws, dZ)]
                    dXl = gkgl - wl ** 2 * dZl
                    return dX, dy, dZ, dXl, dZl

                def scaled(dX, dZ, dXl, dZl):
                    dXt = [Gi @ dx @ Gi.conj().T for (G, Gi, _), dx in zip(scal, dX)]
                    dZt = [G.conj().T @ dz @ G for (G, Gi, _), dz in zip(scal, dZ)]
                    return dXt, dZt, dXl / wl, dZl * wl

                def steps(dXt, dZt, dxlt, dzlt):
                    ap = min([_max_step(lam, d) for (_, _, lam), d in zip(scal, dXt)] + [_max_step_lp(vl, dxlt)] + [math.inf])
                    ad = min([_max_step(lam, d) for (_, _, lam), d in zip(scal, dZt)] + [_max_step_lp(vl, dzlt)] + [math.inf])
                    return ap, ad

                # predictor
                Rt = [-np.diag(lam ** 2).astype(np.complex128) for _, _, lam in scal]
                dX, dy, dZ, dXl, dZl = direction(Rt, -vl ** 2)
                dXt, dZt, dxlt, dzlt = scaled(dX, dZ, dXl, dZl)
                ap, ad = steps(dXt, dZt, dxlt, dzlt)
                ap, ad = min(1.0, ap), min(1.0, ad)
                xz_aff = (sum(_inner(x + ap * dx, z + ad * dz) for x, dx, z, dz in zip(X, dX, Z, dZ))
                          + float((xl + ap * dXl) @ (zl + ad * dZl)))
                sigma = min(1.0, max(0.0, xz_aff / xz)) ** 3 if xz > 0 else 0.0

                # corrector
                Rt = []
                for (_, _, lam), dxt, dzt in zip(scal, dXt, dZt):
                    corr = (dxt @ dzt + dzt @ dxt) / 2
                    Rt.append(sigma * mu * np.eye(len(lam)) - np.diag(lam ** 2) - corr)
                Rtl = sigma * mu - vl ** 2 - dxlt * dzlt
                dX, dy, dZ, dXl, dZl = direction(Rt, Rtl)
                dXt, dZt, dxlt, dzlt = scaled(dX, dZ, dXl, dZl)
                ap_max, ad_max = steps(dXt, dZt, dxlt, dzlt)
                gamma = 0.9 + 0.09 * min(ap, ad)
                ap = min(1.0, gamma * ap_max)
                ad = min(1.0, gamma * ad_max)
                row.update(alpha_p=ap, alpha_d=ad, sigma=sigma)
                rows.append(row)

                new = ([_herm(x + ap * dx) for x, dx in zip(X, dX)], xl + ap * dXl, y + ad * dy,
                       [_herm(z + ad * dz) for z, dz in zip(Z, dZ)], zl + ad * dZl)
                if not all(np.all(np.isfinite(part)) for group in new for part in (group if isinstance(group, list) else [group])):
                    raise FloatingPointError("non-finite search direction")
                X, xl, y, Z, zl = new
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            log.info("iteration %d aborted: %s", it, exc)
            status = NUMERICAL
            break

        if max(ap, ad) < 1e-8:
            stall += 1
            if stall >= 3:
                status = NUMERICAL
                break
        else:
            stall = 0

    x_full = P.assemble(X, xl)
    z_full = P.assemble(Z, zl)
    y_user = -sign * y
    pval = problem.objective_value(x_full)
    dval = float(problem.b @ y_user) + problem.offset
    psd = min([float(np.linalg.eigvalsh(x)[0]) for x in X] + ([float(np.min(xl))] if P.nlp else []))
    res["psd_min_eig"] = psd
    sol = SdpSolution(x=x_full, dual_y=y_user, primal_value=pval, dual_value=dval,
                      gap=abs(dval - pval), residuals=res, status=status, iterations=it,
                      z=z_full, trace=rows if trace else [], wall_time=time.perf_counter() - t0,
                      backend=backend)
    return sol
