"""Preferred bases for an observable.

Two constructions are provided:

* :func:`zero_diagonal_basis` -- a basis in which the displaced observable
  ``M - Tr(M)/d`` has an all-zero diagonal, built from at most ``d - 1``
  complex plane rotations (a constructive Schur-Horn step for the zero
  target diagonal).  Such a basis is far from unique; this is one
  deterministic representative.
* :func:`fourier_mub_basis` -- the eigenbasis of ``M`` rotated by the discrete
  Fourier matrix, which is mutually unbiased to the eigenbasis and therefore
  also gives a constant diagonal ``Tr(M)/d``.

A :class:`BasisChange` stores the new basis kets as the *columns* of a unitary
``U``; the matrix of an operator ``A`` in the new basis is ``U^† A U``.
"""
import dataclasses
import math

import numpy as np

from .config import DEFAULT, Tolerances
from .linalg import EigDecomposition, ValidationError, as_hermitian, hermitian_eig


@dataclasses.dataclass(frozen=True, eq=False)
class DisplacedObservable:
    m_prime: np.ndarray
    displacement: float
    normalization_nm: float

    @property
    def dim(self):
        return self.m_prime.shape[0]


@dataclasses.dataclass(frozen=True, eq=False)
class BasisChange:
    unitary: np.ndarray
    rotations: int = 0

    def transform(self, a) -> np.ndarray:
        u = self.unitary
        return u.conj().T @ np.asarray(a) @ u

    def unitarity_residual(self) -> float:
        u = self.unitary
        return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def displace_observable(m, tols: Tolerances = DEFAULT) -> DisplacedObservable:
    m = as_hermitian(m, tols.hermitian)
    d = m.shape[0]
    shift = float(np.trace(m).real) / d
    mp = m - shift * np.eye(d)
    lmin = float(np.linalg.eigvalsh(m)[0])
    nm = abs(lmin - shift)
    if not is_nontrivial(m, tols):
        nm = 0.0
    mp.setflags(write=False)
    return DisplacedObservable(mp, shift, nm)


def is_nontrivial(m, tols: Tolerances = DEFAULT) -> bool:
    m = np.asarray(m)
    d = m.shape[0]
    shift = np.trace(m).real / d
    return bool(np.max(np.abs(m - shift * np.eye(d))) > tols.nontrivial)


def diagonal_residual(a) -> float:
    return float(np.max(np.abs(np.diag(a)))) if len(a) else 0.0


def zero_diagonal_basis(mp: DisplacedObservable, tols: Tolerances = DEFAULT) -> BasisChange:
    """Basis in which ``mp.m_prime`` has zero diagonal."""
    a = np.array(mp.m_prime, dtype=np.complex128)
    d = a.shape[0]
    scale = 1 + float(np.max(np.abs(a)))
    tr = abs(np.trace(a))
    if tr > tols.trace * d * scale:
        raise ValidationError(f"displaced observable is not traceless: |Tr| = {tr:.3e}", tr)
    u = np.eye(d, dtype=np.complex128)
    zero = tols.zero_entry * scale
    active = [i for i in range(d) if abs(a[i, i].real) > zero]
    count = 0
    while len(active) >= 2:
        diag = np.array([a[i, i].real for i in active])
        p = active[int(np.argmax(diag))]
        q = active[int(np.argmin(diag))]
        ap, aq = a[p, p].real, a[q, q].real
        if ap <= zero or aq >= -zero:
            break
        b = a[p, q]
        phase = np.exp(-1j * np.angle(b)) if abs(b) > 0 else 1.0
        # zero the p entry: ap cos^2 + aq sin^2 + |b| sin 2t = 0
        half = (ap - aq) / 2
        r = math.hypot(half, abs(b))
        delta = math.atan2(abs(b), half)
        x = min(1.0, max(-1.0, -(ap + aq) / (2 * r)))
        theta = (delta + math.acos(x)) / 2
        c, s = math.cos(theta), math.sin(theta)
        rot = np.eye(d, dtype=np.complex128)
        rot[p, p] = c
        rot[q, p] = s * phase
        rot[p, q] = -s * np.conj(phase)
        rot[q, q] = c
        a = rot.conj().T @ a @ rot
        u = u @ rot
        count += 1
        a[p, p] = 0.0
        active.remove(p)
        if abs(a[q, q].real) <= zero:
            active.remove(q)
    return BasisChange(u, count)


def fourier_matrix(d: int) -> np.ndarray:
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / math.sqrt(d)


def fourier_mub_basis(eig: EigDecomposition) -> BasisChange:
    """Columns ``β_i = V F[:, i]``, unbiased to the eigenvectors ``V``."""
    v = np.asarray(eig.eigenvectors)
    return BasisChange(v @ fourier_matrix(v.shape[0]), 0)


def preferred_basis(m, method: str = "schur_horn", tols: Tolerances = DEFAULT) -> BasisChange:
    """Dispatch on ``method`` ('schur_horn' or 'fourier_mub')."""
    if method == "schur_horn":
        return zero_diagonal_basis(displace_observable(m, tols), tols)
    if method == "fourier_mub":
        return fourier_mub_basis(hermitian_eig(m, tols))
    raise ValueError(f"unknown basis method {method!r}")
