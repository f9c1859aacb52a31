# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for zero-anchored scalar k-means.

Semantics must match pushcen._npkernels exactly: nearest-centroid argmin
with strict less-than comparison (lowest index wins ties), and cluster
sums accumulated in input order.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def assign_nearest(double[::1] theta, double[::1] mu):
    """Index of the nearest centroid for every point (ties -> lowest index)."""
    cdef Py_ssize_t n = theta.shape[0]
    cdef Py_ssize_t k = mu.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double best, d, diff
    cdef Py_ssize_t best_j
    for i in range(n):
        best_j = 0
        diff = theta[i] - mu[0]
        best = diff * diff
        for j in range(1, k):
            diff = theta[i] - mu[j]
            d = diff * diff
            if d < best:
                best = d
                best_j = j
        out[i] = best_j
    return out_arr


def cluster_sums(double[::1] theta, long long[::1] assign, Py_ssize_t k):
    """Per-cluster sums and counts, accumulated in input order."""
    sums_arr = np.zeros(k, dtype=np.float64)
    counts_arr = np.zeros(k, dtype=np.int64)
    cdef double[::1] sums = sums_arr
    cdef long long[::1] counts = counts_arr
    cdef Py_ssize_t i, n = theta.shape[0]
    cdef Py_ssize_t j
    for i in range(n):
        j = assign[i]
        sums[j] += theta[i]
        counts[j] += 1
    return sums_arr, counts_arr
