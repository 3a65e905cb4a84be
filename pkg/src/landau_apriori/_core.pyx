# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: tabulated convolution and the nondivergence stencil.

Per-target work is independent, so results do not depend on the thread count.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange

cnp.import_array()


cdef extern from "_simd.h":
    double _dot "la_dot"(const double* a, const double* b, Py_ssize_t m) noexcept nogil
    void _correlate_row "la_correlate_row"(const double* t, const double* f, double* out, Py_ssize_t n) noexcept nogil


def convolve(const double[:, ::1] tables, const double[::1] f, int d, int n, int nthreads=1):
    cdef Py_ssize_t ncomp = tables.shape[0]
    cdef Py_ssize_t N = n - 1
    cdef Py_ssize_t M = 2 * n - 1
    cdef Py_ssize_t size = 1
    cdef int q
    for q in range(d):
        size *= n
    if tables.shape[1] != M ** d or f.shape[0] != size:
        raise ValueError("table/field sizes inconsistent with (d, n)")
    out_arr = np.zeros((ncomp, size))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t t, c, i, j, k, kk
    cdef const double* F = &f[0]

    if d == 1:
        for t in prange(size, nogil=True, num_threads=nthreads, schedule="static"):
            for c in range(ncomp):
                out[c, t] = _dot(&tables[c, N - t], F, n)
    elif d == 2:
        # one target row per task; each source row adds a 1D correlation
        for t in prange(n, nogil=True, num_threads=nthreads, schedule="static"):
            for c in range(ncomp):
                for k in range(n):
                    _correlate_row(&tables[c, (k - t + N) * M + N], F + k * n, &out[c, t * n], n)
    elif d == 3:
        for t in prange(n * n, nogil=True, num_threads=nthreads, schedule="static"):
            i = t // n
            j = t - i * n
            for c in range(ncomp):
                for k in range(n):
                    for kk in range(n):
                        _correlate_row(
                            &tables[c, ((k - i + N) * M + (kk - j + N)) * M + N],
                            F + (k * n + kk) * n,
                            &out[c, t * n],
                            n,
                        )
    else:
        raise ValueError(f"unsupported dimension {d}")
    return out_arr


cdef inline double _at(const double* f, Py_ssize_t n, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    if i < 0 or j < 0 or i >= n or j >= n:
        return 0.0
    return f[i * n + j]


cdef inline double _at3(const double* f, Py_ssize_t n, Py_ssize_t i, Py_ssize_t j, Py_ssize_t k) noexcept nogil:
    if i < 0 or j < 0 or k < 0 or i >= n or j >= n or k >= n:
        return 0.0
    return f[(i * n + j) * n + k]


def apply_operator(const double[::1] f, const double[:, ::1] abar, const double[::1] cbar, int d, int n, double h):
    cdef Py_ssize_t size = f.shape[0]
    out_arr = np.empty(size)
    cdef double[::1] out = out_arr
    cdef const double* F = &f[0]
    cdef double ih2 = 1.0 / (h * h)
    cdef double q = 0.25 * ih2
    cdef Py_ssize_t t, i, j, k
    cdef double fc, s
    if d == 1:
        for t in range(size):
            fc = F[t]
            s = ((F[t + 1] if t + 1 < size else 0.0) - 2.0 * fc + (F[t - 1] if t > 0 else 0.0)) * ih2
            out[t] = abar[0, t] * s + cbar[t] * fc
    elif d == 2:
        for t in range(size):
            i = t // n
            j = t - i * n
            fc = F[t]
            s = abar[0, t] * (_at(F, n, i + 1, j) - 2.0 * fc + _at(F, n, i - 1, j)) * ih2
            s = s + abar[3, t] * (_at(F, n, i, j + 1) - 2.0 * fc + _at(F, n, i, j - 1)) * ih2
            s = s + 2.0 * abar[1, t] * (
                _at(F, n, i + 1, j + 1) - _at(F, n, i + 1, j - 1)
                - _at(F, n, i - 1, j + 1) + _at(F, n, i - 1, j - 1)
            ) * q
            out[t] = s + cbar[t] * fc
    elif d == 3:
        for t in range(size):
            i = t // (n * n)
            j = (t // n) - i * n
            k = t - (i * n + j) * n
            fc = F[t]
            s = abar[0, t] * (_at3(F, n, i + 1, j, k) - 2.0 * fc + _at3(F, n, i - 1, j, k)) * ih2
            s = s + abar[4, t] * (_at3(F, n, i, j + 1, k) - 2.0 * fc + _at3(F, n, i, j - 1, k)) * ih2
            s = s + abar[8, t] * (_at3(F, n, i, j, k + 1) - 2.0 * fc + _at3(F, n, i, j, k - 1)) * ih2
            s = s + 2.0 * abar[1, t] * (
                _at3(F, n, i + 1, j + 1, k) - _at3(F, n, i + 1, j - 1, k)
                - _at3(F, n, i - 1, j + 1, k) + _at3(F, n, i - 1, j - 1, k)
            ) * q
            s = s + 2.0 * abar[2, t] * (
                _at3(F, n, i + 1, j, k + 1) - _at3(F, n, i + 1, j, k - 1)
                - _at3(F, n, i - 1, j, k + 1) + _at3(F, n, i - 1, j, k - 1)
            ) * q
            s = s + 2.0 * abar[5, t] * (
                _at3(F, n, i, j + 1, k + 1) - _at3(F, n, i, j + 1, k - 1)
                - _at3(F, n, i, j - 1, k + 1) + _at3(F, n, i, j - 1, k - 1)
            ) * q
            out[t] = s + cbar[t] * fc
    else:
        raise ValueError(f"unsupported dimension {d}")
    return out_arr
