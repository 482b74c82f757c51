"""Dense complex linear algebra primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The validators
in this module are the constructors of the domain types: they return a
read-only array when the invariants hold and raise :class:`ValidationError`
(reporting the measured residual) otherwise.

Tensor index convention: for ``A ⊗ B`` the pair ``(a, b)`` maps to
``a * dim(B) + b``, so the first factor is the slowest-varying index.
"""
import functools
import json
import math
from typing import NamedTuple, Sequence

import numpy as np

from .config import DEFAULT, Tolerances


class ValidationError(ValueError):
    """An input violated a documented invariant.

    ``residual`` holds the measured violation when one is meaningful.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MatrixParseError(ValidationError):
    pass


class EigDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending, real
    eigenvectors: np.ndarray  # columns are orthonormal eigenvectors


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


def as_matrix(a, square=True) -> np.ndarray:
    """Coerce to a finite 2-d complex array."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValidationError(f"expected a 2-d matrix, got ndim={a.ndim}")
    if square and a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if a.size == 0:
        raise ValidationError("empty matrix")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix contains NaN or Inf")
    return a.astype(np.complex128, copy=False)


def hermiticity_residual(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T)))


def as_hermitian(a, tol: float = DEFAULT.hermitian) -> np.ndarray:
    """Validate Hermiticity and return the exactly symmetrised matrix."""
    a = as_matrix(a)
    res = hermiticity_residual(a)
    if res > tol:
        raise ValidationError(f"matrix is not Hermitian: residual {res:.3e} > {tol:.1e}", res)
    return (a + a.conj().T) / 2


def density_matrix(rho, tols: Tolerances = DEFAULT) -> np.ndarray:
    """Validate a quantum state; return it as a read-only Hermitian array."""
    rho = as_hermitian(rho, tols.hermitian)
    tr = np.trace(rho).real
    if abs(tr - 1) > tols.trace:
        raise ValidationError(f"state trace is {tr!r}, residual {abs(tr - 1):.3e}", abs(tr - 1))
    lmin = float(np.linalg.eigvalsh(rho)[0])
    if lmin < -tols.psd:
        raise ValidationError(f"state has negative eigenvalue {lmin:.3e}", -lmin)
    return _frozen(rho)


def is_density_matrix(rho, tols: Tolerances = DEFAULT) -> bool:
    try:
        density_matrix(rho, tols)
    except ValidationError:
        return False
    return True


def hermitian_eig(m, tols: Tolerances = DEFAULT) -> EigDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    m = as_hermitian(m, tols.hermitian)
    w, v = np.linalg.eigh(m)
    return EigDecomposition(w, v)


def eig_residuals(m, eig: EigDecomposition) -> tuple:
    """(reconstruction residual, Gram residual) in max norm."""
    w, v = eig
    recon = float(np.max(np.abs((v * w) @ v.conj().T - m)))
    gram = float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))))
    return recon, gram


def tensor_product(*ops) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor slowest."""
    if not ops:
        raise ValueError("tensor_product needs at least one operand")
    return functools.reduce(np.kron, (np.asarray(o, dtype=np.complex128) for o in ops))


def partial_trace(m, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem whose index is not in ``keep``.

    The kept subsystems stay in their original order.
    """
    m = as_matrix(m)
    dims = [int(x) for x in dims]
    if any(x < 1 for x in dims) or math.prod(dims) != m.shape[0]:
        raise ValidationError(f"subsystem dims {dims} inconsistent with matrix dim {m.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValidationError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = m.reshape(dims + dims)
    # einsum labels: row indices 0..n-1, column indices n..2n-1, traced pairs share a label
    row = list(range(n))
    col = [i if i not in keep else n + i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    res = np.einsum(t, row + col, out)
    dk = math.prod(dims[k] for k in keep) if keep else 1
    return res.reshape(dk, dk)


def basis_projector(d: int, i: int) -> np.ndarray:
    p = np.zeros((d, d), dtype=np.complex128)
    p[i, i] = 1
    return p


def l1_offdiag(a) -> float:
    a = np.asarray(a)
    return float(np.sum(np.abs(a)) - np.sum(np.abs(np.diag(a))))


# -- matrix documents ---------------------------------------------------------

def matrix_to_doc(m) -> dict:
    """``{"rows": n, "cols": n, "data": [[re, im], ...]}``, row-major."""
    m = as_matrix(m, square=False)
    flat = m.reshape(-1)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_doc(doc, where="matrix") -> np.ndarray:
    if not isinstance(doc, dict):
        raise MatrixParseError(f"{where}: expected an object, got {type(doc).__name__}")
    for key in ("rows", "cols", "data"):
        if key not in doc:
            raise MatrixParseError(f"{where}: missing field {key!r}")
    rows, cols, data = doc["rows"], doc["cols"], doc["data"]
    if not (isinstance(rows, int) and isinstance(cols, int)) or rows < 1 or cols < 1:
        raise MatrixParseError(f"{where}: rows/cols must be positive integers")
    if not isinstance(data, list):
        raise MatrixParseError(f"{where}: field 'data' must be a list")
    # nested [[[re, im], ...], ...] row lists are accepted too
    if data and isinstance(data[0], list) and data[0] and isinstance(data[0][0], list):
        for r, row in enumerate(data):
            if not isinstance(row, list) or len(row) != cols:
                raise MatrixParseError(f"{where}: row {r} has {len(row) if isinstance(row, list) else '?'} entries, expected {cols}")
        data = [entry for row in data for entry in row]
    if len(data) != rows * cols:
        raise MatrixParseError(f"{where}: data has {len(data)} entries, expected rows*cols={rows * cols}")
    out = np.empty(rows * cols, dtype=np.complex128)
    for k, entry in enumerate(data):
        if (not isinstance(entry, list) or len(entry) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry)):
            raise MatrixParseError(f"{where}: entry {k} (row {k // cols}, col {k % cols}) is not a [re, im] pair")
        re, im = float(entry[0]), float(entry[1])
        if not (math.isfinite(re) and math.isfinite(im)):
            raise MatrixParseError(f"{where}: entry {k} (row {k // cols}, col {k % cols}) is not finite")
        out[k] = complex(re, im)
    return out.reshape(rows, cols)


def dumps_matrix(m, indent=None) -> str:
    return json.dumps(matrix_to_doc(m), indent=indent, allow_nan=False)


def loads_matrix(text: str) -> np.ndarray:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MatrixParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return matrix_from_doc(doc)


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        try:
            return loads_matrix(fh.read())
        except MatrixParseError as exc:
            raise MatrixParseError(f"{path}: {exc}") from exc


def save_matrix(path, m) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_matrix(m, indent=None))
        fh.write("\n")


def _reject_constant(name):
    raise MatrixParseError(f"non-finite literal {name} is not allowed")
