# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def box_outcome_moments(lo, hi, double k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lo_a = np.ascontiguousarray(np.atleast_2d(lo), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] hi_a = np.ascontiguousarray(np.atleast_2d(hi), dtype=np.float64)
    cdef Py_ssize_t C = lo_a.shape[0]
    cdef Py_ssize_t n = lo_a.shape[1]
    cdef Py_ssize_t n_out = 1 << n
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Z = np.empty((C, n_out))
    cdef cnp.ndarray[cnp.float64_t, ndim=3] A = np.empty((C, n_out, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=4] B = np.empty((C, n_out, n, n))
    cdef double[:, :] e0 = np.empty((n, 2))
    cdef double[:, :] e1 = np.empty((n, 2))
    cdef double[:, :] e2 = np.empty((n, 2))
    cdef double[:] E0 = np.empty(n)
    cdef double[:] E1 = np.empty(n)
    cdef double[:] E2 = np.empty(n)
    cdef double inv_k = 1.0 / k
    cdef double a, b, m1, m2, m3, prod_all, rest, val
    cdef Py_ssize_t c, o, l, m, t
    cdef int bit

    for c in range(C):
        for l in range(n):
            a = lo_a[c, l]
            b = hi_a[c, l]
            m1 = 0.5 * (a + b)
            m2 = (a * a + a * b + b * b) / 3.0
            m3 = 0.25 * (a + b) * (a * a + b * b)
            e0[l, 0] = 1.0 - m1 * inv_k
            e0[l, 1] = m1 * inv_k
            e1[l, 0] = m1 - m2 * inv_k
            e1[l, 1] = m2 * inv_k
            e2[l, 0] = m2 - m3 * inv_k
            e2[l, 1] = m3 * inv_k
        for o in range(n_out):
            prod_all = 1.0
            for l in range(n):
                bit = (o >> l) & 1
                E0[l] = e0[l, bit]
                E1[l] = e1[l, bit]
                E2[l] = e2[l, bit]
                prod_all *= E0[l]
            Z[c, o] = prod_all
            for l in range(n):
                rest = 1.0
                for t in range(n):
                    if t != l:
                        rest *= E0[t]
                A[c, o, l] = E1[l] * rest
                B[c, o, l, l] = E2[l] * rest
                for m in range(l + 1, n):
                    rest = 1.0
                    for t in range(n):
                        if t != l and t != m:
                            rest *= E0[t]
                    val = E1[l] * E1[m] * rest
                    B[c, o, l, m] = val
                    B[c, o, m, l] = val
    return Z, A, B


def toeplitz_hash(bits, seed, Py_ssize_t out_len):
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] x = np.ascontiguousarray(bits, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] s = np.ascontiguousarray(seed, dtype=np.uint8)
    cdef Py_ssize_t N = x.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(out_len, dtype=np.uint8)
    cdef Py_ssize_t r, col
    cdef unsigned char acc
    for r in range(out_len):
        acc = 0
        for col in range(N):
            acc ^= s[r - col + N - 1] & x[col]
        out[r] = acc & 1
    return out


def bisect_locate(a, b, idx):
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] av = np.ascontiguousarray(a, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] bv = np.ascontiguousarray(b, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = iv.shape[0]
    cdef Py_ssize_t mid, t
    cdef int revealed = 0
    cdef unsigned char diff
    while hi - lo > 1:
        mid = lo + (hi - lo) // 2
        diff = 0
        for t in range(lo, mid):
            diff ^= av[iv[t]] ^ bv[iv[t]]
        revealed += 1
        if diff & 1:
            hi = mid
        else:
            lo = mid
    return int(iv[lo]), revealed
