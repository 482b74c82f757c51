"""Example observables and state families.

Conventions: spin operators are in spin-1/2 units (``S_x^i = σ_x / 2``);
site 1 is the slowest tensor index; a two-level atom has ``|g⟩ = |0⟩`` and
``|e⟩ = |1⟩``, so ``D_+ = |e⟩⟨g|`` raises ``|0⟩`` to ``|1⟩``.
"""
import math

import numpy as np

from .basis import displace_observable, zero_diagonal_basis
from .linalg import ValidationError, density_matrix, tensor_product

MAX_SITES = 12
SPIN_CONVENTION = "S_x^i = sigma_x/2 (spin-1/2 units)"

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
RAISE = np.array([[0, 0], [1, 0]], dtype=np.complex128)  # |e><g|
LOWER = RAISE.T.copy()


def _check_sites(n, minimum=1):
    if not isinstance(n, (int, np.integer)) or n < minimum:
        raise ValidationError(f"number of sites must be an integer >= {minimum}, got {n!r}")
    if n > MAX_SITES:
        raise ValidationError(f"{n} sites exceeds the dense memory budget of {MAX_SITES}")


def local_operator(op, site, n) -> np.ndarray:
    """``1 ⊗ ... ⊗ op (at site) ⊗ ... ⊗ 1`` on ``n`` qubits, site 0-based."""
    factors = [np.eye(2)] * n
    factors[site] = op
    return tensor_product(*factors)


def spin_x(n: int) -> np.ndarray:
    _check_sites(n)
    return sum(local_operator(SIGMA_X / 2, i, n) for i in range(n))


def superradiant_op(n: int) -> np.ndarray:
    """``Σ_{i≠j} D_+^(i) D_-^(j)``."""
    _check_sites(n, minimum=2)
    up = [local_operator(RAISE, i, n) for i in range(n)]
    down = [local_operator(LOWER, i, n) for i in range(n)]
    return sum(up[i] @ down[j] for i in range(n) for j in range(n) if i != j)


def w_state(n: int = 3) -> np.ndarray:
    """Equal superposition of the single-excitation kets, e.g. (|001⟩+|010⟩+|100⟩)/√3."""
    psi = np.zeros(2 ** n, dtype=np.complex128)
    for i in range(n):
        psi[1 << i] = 1
    return psi / math.sqrt(n)


def w_mixture(p: float) -> np.ndarray:
    """``(1 + p/7) 1/8 - (p/7) |w⟩⟨w|`` on three qubits, ``p ∈ [0, 1]``."""
    if not 0 <= p <= 1:
        raise ValidationError(f"w_mixture parameter must lie in [0, 1], got {p}")
    w = w_state(3)
    rho = (1 + p / 7) * np.eye(8) / 8 - (p / 7) * np.outer(w, w.conj())
    return density_matrix(rho)


def product_theta_state(theta: float, n_active: int = 3, n_padding: int = 0) -> np.ndarray:
    """``(cos θ |g⟩ + sin θ |e⟩)^{⊗ n_active} |0⟩^{⊗ n_padding}``."""
    _check_sites(n_active + n_padding)
    local = np.array([math.cos(theta), math.sin(theta)], dtype=np.complex128)
    zero = np.array([1, 0], dtype=np.complex128)
    psi = tensor_product(*([local[:, None]] * n_active + [zero[:, None]] * n_padding)).ravel()
    return density_matrix(np.outer(psi, psi.conj()))


def max_coherent_state(d: int) -> np.ndarray:
    if d < 2:
        raise ValidationError("maximally coherent state needs d >= 2")
    return density_matrix(np.full((d, d), 1.0 / d, dtype=np.complex128))


def random_state(d: int, seed, rank: int = None) -> np.ndarray:
    """Hilbert-Schmidt random state (``rank=1`` gives a Haar pure state)."""
    rng = np.random.default_rng(seed)
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    return density_matrix(rho / np.trace(rho).real)


def random_pure_state(d: int, seed) -> np.ndarray:
    return random_state(d, seed, rank=1)


def random_diagonal_state(d: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(d))
    return density_matrix(np.diag(p).astype(np.complex128))


def random_observable(d: int, seed, traceless: bool = False, zero_diagonal: bool = False) -> np.ndarray:
    """GUE sample.

    ``traceless`` subtracts ``Tr(M)/d``.  ``zero_diagonal`` rotates the
    displaced part into a basis where its diagonal vanishes (the trace shift
    is kept unless ``traceless`` is also set).
    """
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = (g + g.conj().T) / 2
    if zero_diagonal:
        disp = displace_observable(m)
        u = zero_diagonal_basis(disp).unitary
        mp = u.conj().T @ disp.m_prime @ u
        mp = (mp + mp.conj().T) / 2
        np.fill_diagonal(mp, 0)
        m = mp + disp.displacement * np.eye(d)
    if traceless:
        m = m - np.trace(m).real / d * np.eye(d)
    return m


# -- named selectors, e.g. "spin_x:3", "w_mixture:0.5", "product:0.785,3,0" ----

OBSERVABLE_MODELS = {"spin_x", "superradiance"}
STATE_MODELS = {"w_mixture", "product", "max_coherent"}


def parse_model(selector: str):
    """Return ``(kind, name, matrix)`` with kind 'observable' or 'state'."""
    name, sep, args = selector.partition(":")
    if not sep:
        raise ValidationError(f"model selector {selector!r} needs the form name:args")
    try:
        vals = [a.strip() for a in args.split(",")] if args else []
        if name == "spin_x":
            return "observable", name, spin_x(int(vals[0]))
        if name == "superradiance":
            return "observable", name, superradiant_op(int(vals[0]))
        if name == "w_mixture":
            return "state", name, w_mixture(float(vals[0]))
        if name == "product":
            theta = float(vals[0])
            na = int(vals[1]) if len(vals) > 1 else 3
            npad = int(vals[2]) if len(vals) > 2 else 0
            return "state", name, product_theta_state(theta, na, npad)
        if name == "max_coherent":
            return "state", name, max_coherent_state(int(vals[0]))
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad arguments in model selector {selector!r}: {exc}") from exc
    raise ValidationError(f"unknown model {name!r}; known: {sorted(OBSERVABLE_MODELS | STATE_MODELS)}")
