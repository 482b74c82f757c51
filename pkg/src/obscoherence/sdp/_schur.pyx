# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Schur-complement assembly for sparse Hermitian constraints.

For one dense block with scaling matrix ``W`` accumulate

    H[k, l] += Re Tr(A_k W A_l W)
             = Re Σ_{e∈k} Σ_{f∈l} v_e v_f W[c_e, r_f] W[c_f, r_e]

where constraint ``k`` owns the nonzeros ``ptr[k]:ptr[k+1]`` of the
(row, col, val) triplet arrays.  Only constraints listed in ``active`` are
visited.
"""

cdef extern from "complex.h" nogil:
    double creal(double complex)


def schur_block(const double complex[:, ::1] W,
                const long long[::1] rows,
                const long long[::1] cols,
                const double complex[::1] vals,
                const long long[::1] ptr,
                const long long[::1] active,
                double[:, ::1] H):
    cdef Py_ssize_t na = active.shape[0]
    cdef Py_ssize_t ia, ib, e, f, k, l
    cdef double complex acc, ve
    cdef long long re, ce
    with nogil:
        for ia in range(na):
            k = active[ia]
            for ib in range(ia, na):
                l = active[ib]
                acc = 0
                for e in range(ptr[k], ptr[k + 1]):
                    ve = vals[e]
                    re = rows[e]
                    ce = cols[e]
                    for f in range(ptr[l], ptr[l + 1]):
                        acc = acc + ve * vals[f] * W[ce, rows[f]] * W[cols[f], re]
                H[k, l] += creal(acc)
                if k != l:
                    H[l, k] += creal(acc)
