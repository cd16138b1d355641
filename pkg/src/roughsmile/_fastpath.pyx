# Compiled hot kernels: pairwise increment scans behind the discrete Holder
# norms. Semantics must match roughsmile._fastpath_py exactly.

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange

cnp.import_array()


def max_weighted_increment(const double[::1] values, const double[::1] weights):
    """max over lags l=1..len(weights) and i of |x[i+l]-x[i]| * weights[l-1]."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t nlag = weights.shape[0]
    cdef Py_ssize_t l, i
    cdef double best = 0.0, d, w
    with nogil:
        for l in range(1, nlag + 1):
            w = weights[l - 1]
            for i in range(n - l):
                d = values[i + l] - values[i]
                if d < 0.0:
                    d = -d
                d *= w
                if d > best:
                    best = d
    return best


def batch_max_weighted_increment(const double[:, ::1] values, const double[::1] weights):
    """Row-wise max_weighted_increment for a batch of paths."""
    cdef Py_ssize_t rows = values.shape[0]
    cdef Py_ssize_t n = values.shape[1]
    cdef Py_ssize_t nlag = weights.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(rows, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t r, l, i
    cdef double best, d, w
    for r in prange(rows, nogil=True, schedule="static"):
        best = 0.0
        for l in range(1, nlag + 1):
            w = weights[l - 1]
            for i in range(n - l):
                d = values[r, i + l] - values[r, i]
                if d < 0.0:
                    d = -d
                d = d * w
                if d > best:
                    best = d
        ov[r] = best
    return out
