"""Schur-complement kernels with a compiled core and a NumPy fallback.

The compiled extension ``_schur`` is used when it imports; otherwise, or when
``OBSCOHERENCE_PURE_PYTHON=1`` is set, the vectorised NumPy implementation
runs instead.  Both produce the same matrix up to rounding.
"""
import os

import numpy as np

try:
    from ._schur import schur_block as _schur_block_ext
except ImportError:  # extension not built
    _schur_block_ext = None

HAVE_EXTENSION = _schur_block_ext is not None
_FORCE_PURE = os.environ.get("OBSCOHERENCE_PURE_PYTHON", "") not in ("", "0")

# pairwise temporaries are chunked to stay below this many complex entries
_CHUNK_ENTRIES = 4_000_000


def default_backend() -> str:
    return "extension" if HAVE_EXTENSION and not _FORCE_PURE else "numpy"


def schur_block_numpy(W, rows, cols, vals, ptr, active, H):
    """Vectorised twin of the compiled kernel; same arguments, same effect."""
    if len(active) == 0:
        return
    starts = ptr[active]
    counts = ptr[active + 1] - starts
    sel = np.concatenate([np.arange(s, s + c) for s, c in zip(starts, counts)])
    r, c, v = rows[sel], cols[sel], vals[sel]
    seg = np.concatenate([[0], np.cumsum(counts)[:-1]])
    ne = len(sel)
    wcr = W[np.ix_(c, r)]  # wcr[e, f] = W[c_e, r_f]
    step = max(1, _CHUNK_ENTRIES // max(ne, 1))
    out = np.zeros((len(active), len(active)))
    # chunk over whole constraints so reduceat segments stay intact
    bounds = []
    lo = 0
    while lo < len(active):
        hi = lo
        size = 0
        while hi < len(active) and (size == 0 or size + counts[hi] <= step):
            size += counts[hi]
            hi += 1
        bounds.append((lo, hi))
        lo = hi
    for lo, hi in bounds:
        e0 = seg[lo]
        e1 = seg[hi] if hi < len(active) else ne
        t = (v[e0:e1, None] * v[None, :]) * wcr[e0:e1] * wcr[:, e0:e1].T
        part = np.add.reduceat(t.real, seg[lo:hi] - e0, axis=0)
        out[lo:hi] = np.add.reduceat(part, seg, axis=1)
    H[np.ix_(active, active)] += out


def schur_block(W, rows, cols, vals, ptr, active, H, backend=None):
    backend = backend or default_backend()
    if backend == "extension":
        if not HAVE_EXTENSION:
            raise RuntimeError("compiled kernel requested but the extension is not built")
        _schur_block_ext(W, rows, cols, vals, ptr, active, H)
    elif backend == "numpy":
        schur_block_numpy(W, rows, cols, vals, ptr, active, H)
    else:
        raise ValueError(f"unknown kernel backend {backend!r}")
