# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled triangular convolution kernels.

Hot path of the memory-term quadrature: fused boundary correction plus
lower-triangular Toeplitz apply, without the temporaries the vectorised
fallback needs.
"""

import numpy as np

BACKEND = "compiled"


def causal_conv(const double[::1] conv, const double[::1] first, const double[::1] f):
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t i, k
    cdef double acc, f0 = f[0]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(1, n):
            acc = first[i] * f0
            for k in range(1, i + 1):
                acc += conv[i - k] * f[k]
            out[i] = acc
    return out_arr


def causal_conv_multi(const double[::1] conv, const double[::1] first, const double[:, ::1] g):
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t m = g.shape[1]
    cdef Py_ssize_t i, k, j
    cdef double w
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(1, n):
            w = first[i]
            for j in range(m):
                out[i, j] = w * g[0, j]
            for k in range(1, i + 1):
                w = conv[i - k]
                for j in range(m):
                    out[i, j] += w * g[k, j]
    return out_arr


def causal_conv_at(const double[::1] conv, const double[::1] first, const double[:, ::1] g, Py_ssize_t i):
    cdef Py_ssize_t m = g.shape[1]
    cdef Py_ssize_t k, j
    cdef double w
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    if i == 0:
        return out_arr
    with nogil:
        w = first[i]
        for j in range(m):
            out[j] = w * g[0, j]
        for k in range(1, i + 1):
            w = conv[i - k]
            for j in range(m):
                out[j] += w * g[k, j]
    return out_arr
