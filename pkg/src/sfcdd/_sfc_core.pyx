# cython: language_level=3, boundscheck=False, wraparound=False
# distutils: language = c++
"""Compiled Hilbert comparison and sort."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()


cdef extern from "_hilbert_cmp.h" namespace "sfcdd" nogil:
    int hilbert_cmp(const uint64_t* a, const uint64_t* b, int d, int bits,
                    uint64_t* wa, uint64_t* wb)
    void hilbert_argsort(int64_t* perm, int64_t n, const uint64_t* coords,
                         int d, int bits)
    void hilbert_argsort_cmp(int64_t* perm, int64_t n, const uint64_t* coords,
                             int d, int bits)


def compare(const uint64_t[::1] a, const uint64_t[::1] b, int bits):
    cdef int d = a.shape[0]
    cdef uint64_t[::1] wa = np.empty(d, dtype=np.uint64)
    cdef uint64_t[::1] wb = np.empty(d, dtype=np.uint64)
    return hilbert_cmp(&a[0], &b[0], d, bits, &wa[0], &wb[0])


def argsort(const uint64_t[:, ::1] coords, int bits, bint comparison=False):
    """Permutation that sorts the rows of `coords` along the Hilbert curve.

    With ``comparison=True`` the early-exit comparison sort is used even when
    a packed key would fit in 64 bits.
    """
    cdef int64_t n = coords.shape[0]
    cdef int d = coords.shape[1]
    perm = np.arange(n, dtype=np.int64)
    cdef int64_t[::1] pv = perm
    if n > 1:
        with nogil:
            if comparison:
                hilbert_argsort_cmp(&pv[0], n, &coords[0, 0], d, bits)
            else:
                hilbert_argsort(&pv[0], n, &coords[0, 0], d, bits)
    return perm
