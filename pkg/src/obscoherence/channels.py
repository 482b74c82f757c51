"""Kraus and Choi representations of quantum channels.

Choi convention: ``J(Φ) = Σ_ij Φ(|i⟩⟨j|) ⊗ |i⟩⟨j|`` with the output space
first (slow index) and the input space second, so that ``Tr_out J = 1_in``
and ``Φ(ρ) = Tr_in[J (1 ⊗ ρ^T)]``.
"""
import dataclasses
import functools
import json
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .linalg import (
    MatrixParseError,
    ValidationError,
    as_matrix,
    density_matrix,
    matrix_from_doc,
    matrix_to_doc,
    partial_trace,
)


@dataclasses.dataclass(frozen=True)
class KrausSet:
    operators: tuple

    def __init__(self, operators: Sequence, tols: Tolerances = DEFAULT):
        ops = tuple(as_matrix(k) for k in operators)
        if not ops:
            raise ValidationError("empty Kraus set")
        d = ops[0].shape[0]
        if any(k.shape != (d, d) for k in ops):
            raise ValidationError("Kraus operators must all be d x d")
        res = completeness_residual(ops)
        if res > tols.kraus_completeness:
            raise ValidationError(f"Kraus set is incomplete: residual {res:.3e}", res)
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def __len__(self):
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=np.complex128)
        return sum(k @ rho @ k.conj().T for k in self.operators)


def completeness_residual(ops) -> float:
    d = ops[0].shape[0]
    s = sum(k.conj().T @ k for k in ops)
    return float(np.max(np.abs(s - np.eye(d))))


@dataclasses.dataclass(frozen=True)
class CptpDiagnostics:
    psd_min_eig: float
    tp_residual: float
    is_cptp: bool


@dataclasses.dataclass(frozen=True, eq=False)
class ChoiChannel:
    """A channel in Choi form.

    ``is_io`` is ``True`` only for channels built from an explicitly
    incoherent Kraus set; otherwise it is ``None`` (undecided).
    """
    choi: np.ndarray
    input_dim: int
    is_io: Optional[bool] = None
    tols: Tolerances = dataclasses.field(default=DEFAULT, repr=False)

    def __post_init__(self):
        c = as_matrix(self.choi)
        d = int(self.input_dim)
        if c.shape != (d * d, d * d):
            raise ValidationError(f"Choi matrix shape {c.shape} does not match input_dim {d}")
        c = (c + c.conj().T) / 2
        c.setflags(write=False)
        object.__setattr__(self, "choi", c)
        object.__setattr__(self, "input_dim", d)

    @functools.cached_property
    def diagnostics(self) -> CptpDiagnostics:
        return validate_cptp(self)

    @property
    def is_cptp(self) -> bool:
        return self.diagnostics.is_cptp

    @functools.cached_property
    def is_mio(self) -> bool:
        return is_mio_choi(self, self.tols.mio_audit)

    def flags(self) -> dict:
        return {"is_cptp": self.is_cptp, "is_mio": self.is_mio,
                "is_io": "unknown" if self.is_io is None else self.is_io}

    def apply(self, rho) -> np.ndarray:
        return apply_choi(self, rho)


def kraus_to_choi(kraus: KrausSet, is_io: Optional[bool] = None) -> ChoiChannel:
    vs = np.stack([k.reshape(-1) for k in kraus.operators])  # rows v_i, index j*d+k
    choi = vs.T @ vs.conj()
    return ChoiChannel(choi, kraus.dim, is_io=is_io)


def apply_choi(channel: ChoiChannel, rho, validate=True) -> np.ndarray:
    d = channel.input_dim
    rho = as_matrix(rho)
    if rho.shape != (d, d):
        raise ValidationError(f"state dim {rho.shape[0]} does not match channel input dim {d}")
    if validate:
        rho = density_matrix(rho, channel.tols)
    j4 = channel.choi.reshape(d, d, d, d)
    return np.einsum("abcd,bd->ac", j4, rho)


def validate_cptp(channel: ChoiChannel, tols: Tolerances = None) -> CptpDiagnostics:
    tols = tols or channel.tols
    d = channel.input_dim
    lmin = float(np.linalg.eigvalsh(channel.choi)[0])
    tp = partial_trace(channel.choi, [d, d], keep=[1])
    tp_res = float(np.max(np.abs(tp - np.eye(d))))
    ok = lmin >= -tols.choi_psd and tp_res <= tols.choi_tp
    return CptpDiagnostics(lmin, tp_res, ok)


def mio_residual(channel: ChoiChannel) -> float:
    """Largest off-diagonal modulus of Φ(|i⟩⟨i|) over basis states."""
    d = channel.input_dim
    j4 = channel.choi.reshape(d, d, d, d)
    worst = 0.0
    for i in range(d):
        out = j4[:, i, :, i]
        worst = max(worst, float(np.max(np.abs(out - np.diag(np.diag(out))))))
    return worst


def is_mio_choi(channel: ChoiChannel, tol: float = DEFAULT.mio_audit) -> bool:
    # diagonal inputs are mixtures of basis states, so basis states suffice
    return mio_residual(channel) <= tol


def identity_channel(d: int) -> ChoiChannel:
    return kraus_to_choi(KrausSet([np.eye(d)]), is_io=True)


def dephasing_channel(d: int) -> ChoiChannel:
    ops = []
    for i in range(d):
        k = np.zeros((d, d))
        k[i, i] = 1
        ops.append(k)
    return kraus_to_choi(KrausSet(ops), is_io=True)


def compose(second: ChoiChannel, first: ChoiChannel) -> ChoiChannel:
    """Choi matrix of ``second ∘ first`` (apply ``first`` then ``second``)."""
    d = first.input_dim
    if second.input_dim != d:
        raise ValidationError("channel dimensions differ")
    # J_{21}[(a,b),(a',b')] = Σ J2[(a,c),(a',c')] J1[(c,b),(c',b')]
    j1 = first.choi.reshape(d, d, d, d)
    j2 = second.choi.reshape(d, d, d, d)
    j = np.einsum("acxe,cbeg->abxg", j2, j1)
    return ChoiChannel(j.reshape(d * d, d * d), d)


def is_incoherent_kraus(ops, tol=0.0) -> bool:
    """Every operator has at most one nonzero entry per column."""
    for k in ops:
        if np.any(np.sum(np.abs(np.asarray(k)) > tol, axis=0) > 1):
            return False
    return True


def random_io_instrument(d: int, k: int, seed, sparsity: float = 0.0) -> KrausSet:
    """Random incoherent Kraus set with ``k`` branches.

    Branch ``n`` sends column ``j`` to row ``π_n(j)`` for a random permutation
    ``π_n`` with complex amplitude ``c_nj``; for every column the amplitude
    vector over branches is normalised, which makes the set complete exactly.
    With ``sparsity > 0`` amplitudes are zeroed at random (keeping at least
    one branch per column), giving non-unitary branches such as projectors.
    """
    if k < 1 or d < 1:
        raise ValueError("need d >= 1 and k >= 1")
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=(k, d)) + 1j * rng.normal(size=(k, d))
    if sparsity > 0 and k > 1:
        mask = rng.random((k, d)) < sparsity
        keep = rng.integers(0, k, size=d)
        mask[keep, np.arange(d)] = False
        amps[mask] = 0
    amps /= np.linalg.norm(amps, axis=0, keepdims=True)
    ops = []
    for n in range(k):
        perm = rng.permutation(d)
        op = np.zeros((d, d), dtype=np.complex128)
        op[perm, np.arange(d)] = amps[n]
        ops.append(op)
    return KrausSet(ops)


# -- channel documents ----------------------------------------------------------

def channel_to_doc(obj) -> dict:
    if isinstance(obj, KrausSet):
        return {"kind": "kraus", "input_dim": obj.dim,
                "matrices": [matrix_to_doc(k) for k in obj.operators]}
    if isinstance(obj, ChoiChannel):
        return {"kind": "choi", "input_dim": obj.input_dim, "matrices": [matrix_to_doc(obj.choi)]}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def channel_from_doc(doc):
    if not isinstance(doc, dict) or doc.get("kind") not in ("kraus", "choi"):
        raise MatrixParseError("channel document needs kind 'kraus' or 'choi'")
    d = doc.get("input_dim")
    mats = doc.get("matrices")
    if not isinstance(d, int) or d < 1 or not isinstance(mats, list) or not mats:
        raise MatrixParseError("channel document needs positive input_dim and a non-empty matrices list")
    parsed = [matrix_from_doc(m, where=f"matrices[{i}]") for i, m in enumerate(mats)]
    if doc["kind"] == "kraus":
        ks = KrausSet(parsed)
        if ks.dim != d:
            raise MatrixParseError(f"Kraus operators are {ks.dim}-dimensional, input_dim says {d}")
        return ks
    if len(parsed) != 1:
        raise MatrixParseError("choi document must hold exactly one matrix")
    return ChoiChannel(parsed[0], d)


def dumps_channel(obj) -> str:
    return json.dumps(channel_to_doc(obj), allow_nan=False)


def loads_channel(text: str):
    return channel_from_doc(json.loads(text))
