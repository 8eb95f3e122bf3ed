# cython: language_level=3
"""Compiled pairwise kernels; see ``_pykernels`` for the reference versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def pairwise_sq_dists(Z):
    cdef double[:, ::1] z = np.ascontiguousarray(Z, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0], d = z.shape[1]
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double s, t
    with nogil:
        for i in range(n):
            o[i, i] = 0.0
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    t = z[i, k] - z[j, k]
                    s = s + t * t
                o[i, j] = s
                o[j, i] = s
    return out


def gaussian_kernel(Z, double w2):
    cdef double[:, ::1] z = np.ascontiguousarray(Z, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0], d = z.shape[1]
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double s, t, v
    with nogil:
        for i in range(n):
            o[i, i] = 1.0
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    t = z[i, k] - z[j, k]
                    s = s + t * t
                v = exp(-w2 * s)
                o[i, j] = v
                o[j, i] = v
    return out


def double_center(K):
    cdef double[:, ::1] k = np.ascontiguousarray(K, dtype=np.float64)
    cdef Py_ssize_t n = k.shape[0], m = k.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] row = np.zeros(n, dtype=np.float64)
    cdef double[::1] col = np.zeros(m, dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double grand = 0.0
    with nogil:
        for i in range(n):
            for j in range(m):
                row[i] += k[i, j]
                col[j] += k[i, j]
        for i in range(n):
            grand += row[i]
            row[i] /= m
        for j in range(m):
            col[j] /= n
        grand /= n * m
        for i in range(n):
            for j in range(m):
                o[i, j] = k[i, j] - row[i] - col[j] + grand
    return out


def gaussian_grad(Z, K, G, double w2):
    # one pass over the rows of W = G * K, accumulating the row sum and W @ Z
    # without materializing W; G is assumed symmetric
    cdef double[:, ::1] z = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[:, ::1] kk = np.ascontiguousarray(K, dtype=np.float64)
    cdef double[:, ::1] g = np.ascontiguousarray(G, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0], d = z.shape[1]
    out = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t a, b, c
    cdef double wab, rowsum
    with nogil:
        for a in range(n):
            rowsum = 0.0
            for b in range(n):
                wab = g[a, b] * kk[a, b]
                rowsum = rowsum + wab
                for c in range(d):
                    o[a, c] -= wab * z[b, c]
            for c in range(d):
                o[a, c] = -4.0 * w2 * (rowsum * z[a, c] + o[a, c])
    return out
