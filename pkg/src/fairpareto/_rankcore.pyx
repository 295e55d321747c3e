# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled identification-rank kernel.

For each probe, counts gallery vectors of a different identity that lie
strictly closer (squared euclidean) than the probe's nearest same-identity
mate. Probes without a mate are flagged excluded. This is the O(n^2 d)
inner loop of embedding evaluation, hence the compiled path.
"""
import numpy as np

cimport numpy as cnp


def rank_counts(const double[:, ::1] vectors, const cnp.int64_t[::1] identities):
    cdef Py_ssize_t n = vectors.shape[0]
    cdef Py_ssize_t d = vectors.shape[1]
    ranks_arr = np.zeros(n, dtype=np.int64)
    excluded_arr = np.zeros(n, dtype=bool)
    cdef cnp.int64_t[::1] ranks = ranks_arr
    cdef cnp.uint8_t[::1] excluded = excluded_arr.view(np.uint8)
    cdef double[::1] dist2 = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double acc, diff, mate_best
    cdef cnp.int64_t count, probe_id
    cdef bint have_mate

    for i in range(n):
        probe_id = identities[i]
        have_mate = False
        mate_best = 0.0
        for j in range(n):
            acc = 0.0
            for k in range(d):
                diff = vectors[j, k] - vectors[i, k]
                acc += diff * diff
            dist2[j] = acc
            if j != i and identities[j] == probe_id:
                if not have_mate or acc < mate_best:
                    mate_best = acc
                    have_mate = True
        if not have_mate:
            excluded[i] = 1
            continue
        count = 0
        for j in range(n):
            if identities[j] != probe_id and dist2[j] < mate_best:
                count += 1
        ranks[i] = count
    return ranks_arr, excluded_arr
