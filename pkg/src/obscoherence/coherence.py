"""Observable-induced coherence measures and their semidefinite programs.

The MIO measure of a state ``ρ`` for an observable ``M`` on ``d`` levels is

    C(ρ) = max_{Φ ∈ MIO} Tr[M Φ(ρ)] - Tr(M)/d

where MIO is the set of channels mapping diagonal states to diagonal states
in the computational basis.  It is a faithful measure when ``M - Tr(M)/d``
has zero diagonal in that basis; :func:`to_preferred_basis` rotates a pair
``(M, ρ)`` into such a basis.

Three equivalent programs compute the maximum:

* faithful -- a single PSD variable on ``A ⊗ B ⊗ C`` (C a two-level flag,
  fastest index) whose flag-0 block is the Choi matrix and whose flag-1
  diagonal holds the output populations;
* reduced -- the block-diagonal restriction: the Choi block plus a diagonal
  block of ``d²`` population slacks;
* dual -- ``min Tr(Y_B)`` over ``1 ⊗ Y_B + Σ_i Y_A^i ⊗ |i⟩⟨i| ⪰ M ⊗ ρ^T``
  with ``diag(Y_A^i) ≤ 0``, written in standard form by eliminating the free
  matrices.
"""
import dataclasses
import itertools
import math
from typing import List, Optional

import numpy as np

from .basis import BasisChange, displace_observable, is_nontrivial, zero_diagonal_basis
from .channels import ChoiChannel, KrausSet, channel_to_doc, identity_channel, is_mio_choi, mio_residual, validate_cptp
from .config import DEFAULT, Tolerances
from .linalg import ValidationError, as_hermitian, density_matrix, l1_offdiag
from .sdp import OPTIMAL, SdpProblem, SdpSolution, solve_sdp

FORMULATIONS = ("faithful", "reduced", "dual")


class SolverError(RuntimeError):
    """The solver stopped without certified optimality.

    ``bounds`` brackets the optimum with the last primal and dual values.
    """

    def __init__(self, message, solution: SdpSolution, bounds=None):
        super().__init__(message)
        self.solution = solution
        self.bounds = bounds if bounds is not None else solution.bounds()


# -- constraint assembly ----------------------------------------------------------

class _Rows:
    """Accumulates real linear constraints on Hermitian matrix entries."""

    def __init__(self, n):
        self.n = n
        self.items = []

    @staticmethod
    def re(p, q, coef=1.0):
        # Tr(A X) = Re X[p, q]
        if p == q:
            return [(p, p, coef)]
        return [(p, q, coef / 2), (q, p, coef / 2)]

    @staticmethod
    def im(p, q, coef=1.0):
        # Tr(A X) = Im X[p, q]
        return [(p, q, 0.5j * coef), (q, p, -0.5j * coef)]

    def add(self, entries, rhs):
        self.items.append((entries, float(rhs)))

    def constraints(self):
        import scipy.sparse as sp

        out = []
        for entries, rhs in self.items:
            r, c, v = zip(*entries)
            out.append((sp.coo_array((np.array(v, dtype=np.complex128), (r, c)), shape=(self.n, self.n)), rhs))
        return out


def _sparse(a):
    import scipy.sparse as sp

    return sp.coo_array(a)


def _check_pair(m, rho, tols):
    m = as_hermitian(m, tols.hermitian)
    rho = density_matrix(rho, tols)
    if m.shape != rho.shape:
        raise ValidationError(f"observable dim {m.shape[0]} and state dim {rho.shape[0]} differ")
    return m, np.asarray(rho)


def build_mio_primal_faithful(m, rho, tols: Tolerances = DEFAULT) -> SdpProblem:
    m, rho = _check_pair(m, rho, tols)
    d = m.shape[0]
    n = 2 * d * d

    def idx(a, b, c):
        return (a * d + b) * 2 + c

    flag0 = np.diag([1.0, 0.0])
    objective = np.kron(np.kron(m, rho.T), flag0)
    rows = _Rows(n)
    _trace_preserving_rows(rows, d, lambda a, b: idx(a, b, 0))
    for i in range(d):
        _mio_offdiag_rows(rows, d, i, lambda a, b: idx(a, b, 0))
        for a in range(d):
            # population of |a> in Φ(|i><i|) equals the flag-1 diagonal entry
            rows.add(_Rows.re(idx(a, i, 0), idx(a, i, 0)) + _Rows.re(idx(a, i, 1), idx(a, i, 1), -1.0), 0.0)
    return SdpProblem(_sparse(objective), rows.constraints(), tols=tols, name="mio-faithful")


def build_mio_primal_reduced(m, rho, tols: Tolerances = DEFAULT) -> SdpProblem:
    m, rho = _check_pair(m, rho, tols)
    d = m.shape[0]
    nj = d * d
    n = nj + nj
    objective = np.zeros((n, n), dtype=np.complex128)
    objective[:nj, :nj] = np.kron(m, rho.T)
    rows = _Rows(n)

    def jdx(a, b):
        return a * d + b

    _trace_preserving_rows(rows, d, jdx)
    for i in range(d):
        _mio_offdiag_rows(rows, d, i, jdx)
        for a in range(d):
            rows.add(_Rows.re(jdx(a, i), jdx(a, i)) + [(nj + jdx(a, i), nj + jdx(a, i), -1.0)], 0.0)
    return SdpProblem(_sparse(objective), rows.constraints(), blocks=[nj, -nj], tols=tols, name="mio-reduced")


def _trace_preserving_rows(rows, d, pos):
    # Σ_a J[(a,b),(a,b')] = δ_bb'
    for b in range(d):
        for bp in range(b, d):
            re = [e for a in range(d) for e in _Rows.re(pos(a, b), pos(a, bp))]
            rows.add(re, 1.0 if b == bp else 0.0)
            if bp != b:
                rows.add([e for a in range(d) for e in _Rows.im(pos(a, b), pos(a, bp))], 0.0)


def _mio_offdiag_rows(rows, d, i, pos):
    # Φ(|i><i|)[a, a'] = J[(a,i),(a',i)] = 0 for a != a'
    for a in range(d):
        for ap in range(a + 1, d):
            rows.add(_Rows.re(pos(a, i), pos(ap, i)), 0.0)
            rows.add(_Rows.im(pos(a, i), pos(ap, i)), 0.0)


def build_mio_dual(m, rho, tols: Tolerances = DEFAULT) -> SdpProblem:
    """Dual program in standard (minimisation) form.

    Variables: ``Z = 1 ⊗ Y_B + Σ_i Y_A^i ⊗ |i⟩⟨i| - M ⊗ ρ^T ⪰ 0`` and the
    slacks ``s[b, a] = -⟨a|Y_A^b|a⟩ ≥ 0``.  Eliminating ``Y_B`` and ``Y_A^i``
    leaves linear equalities on ``(Z, s)`` and the objective
    ``Tr(Y_B) = (Tr Z + Σ s)/d + Tr(M)/d``.
    """
    m, rho = _check_pair(m, rho, tols)
    d = m.shape[0]
    nz = d * d
    n = nz + nz

    def z(a, b):
        return a * d + b

    def s(b, a):
        return nz + b * d + a

    rows = _Rows(n)
    # (M ⊗ ρ^T)[(a,b),(a',b')] = M[a,a'] ρ[b',b]
    for a, b, ap, bp in itertools.product(range(d), repeat=4):
        p, q = z(a, b), z(ap, bp)
        if a == ap or b == bp or p >= q:
            continue
        val = -m[a, ap] * rho[bp, b]
        rows.add(_Rows.re(p, q), val.real)
        rows.add(_Rows.im(p, q), val.imag)
    for b in range(d):
        for bp in range(b + 1, d):
            for a in range(1, d):
                val = -(m[a, a] - m[0, 0]).real * rho[bp, b]
                rows.add(_Rows.re(z(a, b), z(a, bp)) + _Rows.re(z(0, b), z(0, bp), -1.0), val.real)
                rows.add(_Rows.im(z(a, b), z(a, bp)) + _Rows.im(z(0, b), z(0, bp), -1.0), val.imag)
    for b in range(d):
        for a in range(1, d):
            val = -(m[a, a] - m[0, 0]).real * rho[b, b].real
            rows.add([(z(a, b), z(a, b), 1.0), (s(b, a), s(b, a), 1.0),
                      (z(0, b), z(0, b), -1.0), (s(b, 0), s(b, 0), -1.0)], val)
    objective = np.eye(n) / d
    offset = float(np.trace(m).real * np.trace(rho).real) / d
    return SdpProblem(_sparse(objective), rows.constraints(), blocks=[nz, -nz], offset=offset,
                      sense="min", tols=tols, name="mio-dual")


def dual_variables(m, rho, x) -> dict:
    """Recover ``Y_B`` and the ``Y_A^i`` diagonals from a dual-form solution."""
    m = np.asarray(m)
    d = m.shape[0]
    nz = d * d
    zmat = x[:nz, :nz]
    svec = np.real(np.diag(x)[nz:]).reshape(d, d)  # svec[b, a]
    yb = np.zeros((d, d), dtype=np.complex128)
    for b in range(d):
        for bp in range(d):
            if b == bp:
                yb[b, b] = zmat[b, b] + svec[b, 0] + m[0, 0] * rho[b, b]
            else:
                yb[b, bp] = zmat[b, bp] + m[0, 0] * rho[bp, b]
    return {"Y_B": yb, "Y_A_diag": -svec}


# -- results ----------------------------------------------------------------------

@dataclasses.dataclass(eq=False)
class MioMeasureResult:
    value: float
    raw_optimum: float
    channel: ChoiChannel
    gap: float
    formulation: str
    status: str = OPTIMAL
    iterations: int = 0
    diagnostics: dict = dataclasses.field(default_factory=dict)
    solution: Optional[SdpSolution] = dataclasses.field(default=None, repr=False)

    def to_record(self, include_channel=True) -> dict:
        rec = {"measure": self.value, "raw_optimum": self.raw_optimum, "gap": self.gap,
               "formulation": self.formulation}
        if include_channel and self.channel is not None:
            rec["channel"] = channel_to_doc(self.channel)
        rec["diagnostics"] = dict(self.diagnostics, status=self.status, iterations=self.iterations)
        return rec


def _resolve_formulation(formulation, d):
    if formulation in (None, "auto"):
        return "faithful" if d <= 3 else "reduced"
    if formulation not in FORMULATIONS:
        raise ValueError(f"unknown formulation {formulation!r}; choose from {FORMULATIONS}")
    return formulation


def solve_mio_program(m, rho, formulation="auto", tols: Tolerances = DEFAULT, **solver_opts):
    """Build and solve one of the three programs; return (problem, solution, formulation)."""
    m, rho = _check_pair(m, rho, tols)
    form = _resolve_formulation(formulation, m.shape[0])
    builder = {"faithful": build_mio_primal_faithful, "reduced": build_mio_primal_reduced,
               "dual": build_mio_dual}[form]
    prob = builder(m, rho, tols)
    sol = solve_sdp(prob, tols=tols, **solver_opts)
    return prob, sol, form


def extract_choi(x, d, formulation) -> np.ndarray:
    if formulation == "faithful":
        j = np.asarray(x).reshape(d, d, 2, d, d, 2)[:, :, 0, :, :, 0]
        return j.reshape(d * d, d * d)
    if formulation == "reduced":
        return np.asarray(x)[:d * d, :d * d]
    raise ValueError("the dual program carries no channel")


def c_mio(m, rho, formulation="auto", tols: Tolerances = DEFAULT, **solver_opts) -> MioMeasureResult:
    """MIO coherence measure of ``rho`` induced by observable ``m``."""
    m, rho = _check_pair(m, rho, tols)
    d = m.shape[0]
    shift = float(np.trace(m).real) / d
    form = _resolve_formulation(formulation, d)
    if not is_nontrivial(m, tols):
        ch = identity_channel(d)
        return MioMeasureResult(0.0, shift, ch, 0.0, form, diagnostics={"trivial_observable": True})
    prob, sol, form = solve_mio_program(m, rho, form, tols, **solver_opts)
    if sol.status != OPTIMAL:
        lo, hi = sol.bounds()
        raise SolverError(f"MIO program ({form}) ended with status {sol.status}; "
                          f"measure lies in [{lo - shift:.8g}, {hi - shift:.8g}]",
                          sol, (lo - shift, hi - shift))
    raw = sol.primal_value
    diag = {"constraints": prob.m, "removed_rows": list(prob.removed_rows), "dual_value": sol.dual_value,
            "wall_time": sol.wall_time, "backend": sol.backend}
    if form == "dual":
        ch = None
    else:
        audit = tols.replace(choi_psd=tols.mio_audit, choi_tp=tols.mio_audit)
        ch = ChoiChannel(extract_choi(sol.x, d, form), d, tols=audit)
        cp = validate_cptp(ch, audit)
        diag.update(channel_psd_min_eig=cp.psd_min_eig, channel_tp_residual=cp.tp_residual,
                    channel_is_cptp=cp.is_cptp, channel_mio_residual=mio_residual(ch),
                    channel_is_mio=is_mio_choi(ch, tols.mio_audit))
    return MioMeasureResult(raw - shift, raw, ch, sol.gap, form, sol.status, sol.iterations, diag, sol)


def mio_value(m, rho, formulation="auto", tols: Tolerances = DEFAULT, **solver_opts) -> float:
    return c_mio(m, rho, formulation, tols, **solver_opts).value


# -- robustness, l1, normalisation --------------------------------------------------

def build_robustness(rho, tols: Tolerances = DEFAULT) -> SdpProblem:
    """``max Tr(ρ W)`` over ``W ⪰ -1`` with ``diag(W) ≤ 0``.

    Standard form in ``P = W + 1 ⪰ 0`` and slacks ``t = -diag(W) ≥ 0`` tied
    by ``P_ii + t_i = 1``.
    """
    rho = np.asarray(density_matrix(rho, tols))
    d = rho.shape[0]
    n = 2 * d
    objective = np.zeros((n, n), dtype=np.complex128)
    objective[:d, :d] = rho
    rows = _Rows(n)
    for i in range(d):
        rows.add([(i, i, 1.0), (d + i, d + i, 1.0)], 1.0)
    return SdpProblem(_sparse(objective), rows.constraints(), blocks=[d, -d], offset=-1.0,
                      tols=tols, name="robustness")


def robustness_witness(rho, tols: Tolerances = DEFAULT, **solver_opts):
    """``(C_R, W, solution)`` with ``W`` the optimal witness."""
    prob = build_robustness(rho, tols)
    sol = solve_sdp(prob, tols=tols, **solver_opts)
    if sol.status != OPTIMAL:
        raise SolverError(f"robustness program ended with status {sol.status}", sol)
    d = prob.n // 2
    w = sol.x[:d, :d] - np.eye(d)
    return sol.primal_value, (w + w.conj().T) / 2, sol


def robustness(rho, tols: Tolerances = DEFAULT, **solver_opts) -> float:
    return robustness_witness(rho, tols, **solver_opts)[0]


def l1_norm(rho) -> float:
    """Sum of the moduli of the off-diagonal entries."""
    return l1_offdiag(rho)


def normalization_nm(m, tols: Tolerances = DEFAULT) -> float:
    """``|λ_min(M) - Tr(M)/d|``."""
    return displace_observable(m, tols).normalization_nm


# -- preferred basis --------------------------------------------------------------

def to_preferred_basis(m, rho, tols: Tolerances = DEFAULT):
    """Express ``(M, ρ)`` in a basis where ``M - Tr(M)/d`` has zero diagonal."""
    m, rho = _check_pair(m, rho, tols)
    basis: BasisChange = zero_diagonal_basis(displace_observable(m, tols), tols)
    mt = basis.transform(m)
    rt = basis.transform(rho)
    return (mt + mt.conj().T) / 2, (rt + rt.conj().T) / 2, basis


# -- IO lower bound ---------------------------------------------------------------

def io_lower_bound(m, rho, seed=0, restarts: int = 3, max_permutations: int = 200,
                   sweeps: int = 50, tols: Tolerances = DEFAULT) -> float:
    """Best value of ``Tr(M U ρ U^†) - Tr(M)/d`` over incoherent unitaries ``U``.

    ``U`` ranges over permutations times diagonal phases.  All permutations
    are tried for ``d ≤ 5``, otherwise the identity plus a seeded sample.
    Phases are tuned by exact coordinate ascent from zero and from
    ``restarts`` random starts.  The result is a feasible value, hence a lower
    bound on the IO measure (and on the MIO measure).
    """
    m, rho = _check_pair(m, rho, tols)
    d = m.shape[0]
    shift = float(np.trace(m).real) / d
    rng = np.random.default_rng(seed)
    if math.factorial(d) <= 120:
        perms = list(itertools.permutations(range(d)))
    else:
        perms = [tuple(range(d))] + [tuple(rng.permutation(d)) for _ in range(max_permutations)]
    best = -math.inf
    for perm in perms:
        perm = np.array(perm)
        sigma = np.empty_like(rho)
        sigma[np.ix_(perm, perm)] = rho  # P ρ P^T with P|j> = |perm[j]>
        bmat = m.T * sigma  # bmat[j, k] = M[k, j] σ[j, k]
        base = float(np.real(np.trace(m @ sigma)))
        best = max(best, base)
        if np.max(np.abs(sigma - np.diag(np.diag(sigma)))) == 0:
            continue
        starts = [np.zeros(d)] + [rng.uniform(0, 2 * np.pi, d) for _ in range(restarts)]
        for phi in starts:
            best = max(best, _phase_ascent(bmat, phi, sweeps))
    return best - shift


def _phase_ascent(bmat, phi, sweeps):
    u = np.exp(1j * phi)
    d = len(u)
    off = bmat - np.diag(np.diag(bmat))
    diag_sum = float(np.real(np.trace(bmat)))
    prev = -math.inf
    for _ in range(sweeps):
        for j in range(d):
            g = off[j] @ u.conj()  # Σ_k B[j,k] conj(u_k)
            if abs(g) > 0:
                u[j] = np.exp(-1j * np.angle(g))
        val = diag_sum + float(np.real(u @ off @ u.conj()))
        if val - prev <= 1e-14 * (1 + abs(val)):
            break
        prev = val
    return diag_sum + float(np.real(u @ off @ u.conj()))


# -- hierarchy --------------------------------------------------------------------

PAIRS = (("c_io_lower", "c_mio"), ("c_mio", "nm_cr"), ("nm_cr", "nm_cl1"))


@dataclasses.dataclass
class HierarchyReport:
    c_io_lower: Optional[float]
    c_mio: Optional[float]
    nm_cr: Optional[float]
    nm_cl1: Optional[float]
    nm: float
    c_r: Optional[float]
    c_l1: float
    violations: List[tuple] = dataclasses.field(default_factory=list)
    tight: List[tuple] = dataclasses.field(default_factory=list)
    errors: dict = dataclasses.field(default_factory=dict)
    warnings: List[str] = dataclasses.field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.errors

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def hierarchy_report(m, rho, seed=0, formulation="auto", tols: Tolerances = DEFAULT,
                     **solver_opts) -> HierarchyReport:
    """Evaluate the chain ``C_IO ≤ C_MIO ≤ N_M C_R ≤ N_M C_l1``.

    ``c_io_lower`` is a lower bound on ``C_IO``, so the first link is checked
    against it.  Violations beyond ``tols.hierarchy_slack`` are listed, never
    suppressed; links that hold with equality to ``tols.tight`` are listed
    under ``tight``.
    """
    m, rho = _check_pair(m, rho, tols)
    d = m.shape[0]
    disp = displace_observable(m, tols)
    warnings = []
    if not is_nontrivial(m, tols):
        warnings.append("trivial observable: every measure is zero")
    elif np.max(np.abs(np.diag(disp.m_prime))) > 1e-9:
        warnings.append("displaced observable has a nonzero diagonal in this basis; "
                        "the chain presumes its zero-diagonal basis (see to_preferred_basis)")
    errors = {}
    nm = disp.normalization_nm
    c_l1 = l1_norm(rho)
    vals = {"c_io_lower": None, "c_mio": None, "nm_cr": None, "nm_cl1": nm * c_l1}
    c_r = None
    try:
        vals["c_io_lower"] = io_lower_bound(m, rho, seed=seed, tols=tols)
    except Exception as exc:  # noqa: BLE001 - partial reports carry the error text
        errors["c_io_lower"] = str(exc)
    try:
        vals["c_mio"] = c_mio(m, rho, formulation, tols, **solver_opts).value
    except SolverError as exc:
        errors["c_mio"] = str(exc)
    try:
        c_r = robustness(rho, tols, **solver_opts)
        vals["nm_cr"] = nm * c_r
    except SolverError as exc:
        errors["nm_cr"] = str(exc)
    violations, tight = [], []
    for lo, hi in PAIRS:
        a, b = vals[lo], vals[hi]
        if a is None or b is None:
            continue
        if a - b > tols.hierarchy_slack:
            violations.append((f"{lo}<={hi}", a - b))
        if abs(a - b) <= tols.tight:
            tight.append(f"{lo}<={hi}")
    return HierarchyReport(vals["c_io_lower"], vals["c_mio"], vals["nm_cr"], vals["nm_cl1"],
                           nm, c_r, c_l1, violations, tight, errors, warnings)


# -- strong monotonicity ------------------------------------------------------------

@dataclasses.dataclass
class MonotonicityAudit:
    lhs: float
    rhs: float
    branches: List[tuple]
    skipped: int
    violation: float
    ok: bool


def strong_monotonicity_audit(m, rho, instrument: KrausSet, formulation="auto",
                              tols: Tolerances = DEFAULT, **solver_opts) -> MonotonicityAudit:
    """Check ``C(ρ) ≥ Σ_i p_i C(ρ_i)`` for the branches of an incoherent instrument."""
    m, rho = _check_pair(m, rho, tols)
    lhs = c_mio(m, rho, formulation, tols, **solver_opts).value
    rhs = 0.0
    branches = []
    skipped = 0
    for k in instrument.operators:
        out = k @ rho @ k.conj().T
        p = float(np.trace(out).real)
        if p < tols.min_branch_prob:
            skipped += 1
            continue
        post = out / p
        post = (post + post.conj().T) / 2
        c = c_mio(m, post, formulation, tols, **solver_opts).value
        branches.append((p, c))
        rhs += p * c
    violation = max(0.0, rhs - lhs)
    return MonotonicityAudit(lhs, rhs, branches, skipped, violation, violation <= tols.monotonicity_slack)
