# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled causal biased-attention kernel (drop-in for numpy_ops)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def causal_attention(cnp.ndarray[cnp.float64_t, ndim=3] q,
                     cnp.ndarray[cnp.float64_t, ndim=3] k,
                     cnp.ndarray[cnp.float64_t, ndim=3] v,
                     cnp.ndarray[cnp.float64_t, ndim=1] bias,
                     double scale):
    cdef Py_ssize_t heads = q.shape[0]
    cdef Py_ssize_t n = q.shape[1]
    cdef Py_ssize_t dim = q.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.zeros((heads, n, dim))
    cdef cnp.ndarray[cnp.float64_t, ndim=3] probs = np.zeros((heads, n, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] row = np.empty(n)
    cdef Py_ssize_t h, i, j, d
    cdef double s, m, z, p

    for h in range(heads):
        for i in range(n):
            m = -1e300
            for j in range(i + 1):
                s = 0.0
                for d in range(dim):
                    s += q[h, i, d] * k[h, j, d]
                s = s * scale + bias[j]
                row[j] = s
                if s > m:
                    m = s
            z = 0.0
            for j in range(i + 1):
                row[j] = exp(row[j] - m)
                z += row[j]
            for j in range(i + 1):
                p = row[j] / z
                probs[h, i, j] = p
                for d in range(dim):
                    out[h, i, d] += p * v[h, j, d]
    return out, probs
