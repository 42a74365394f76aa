# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot-path kernels; see reference.py for the contracts."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def excursion_dp(int n, int tau, double gamma):
    cdef double p_up = 0.5 * (1.0 + gamma)
    cdef double p_dn = 1.0 - p_up
    cdef cnp.ndarray[cnp.float64_t, ndim=1] prob_arr = np.zeros(2 * n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] new_arr = np.zeros(2 * n + 1)
    cdef double[::1] prob = prob_arr
    cdef double[::1] new = new_arr
    cdef double[::1] tmp
    cdef Py_ssize_t i, j, lo, hi
    cdef double total = 0.0
    prob[n] = 1.0
    for i in range(1, n + 1):
        # reachable band: |S| <= i, index j = S + n
        lo = n - i
        hi = n + i
        if i >= tau and n - tau < hi:
            hi = n - tau
        for j in range(lo, hi + 1):
            new[j] = 0.0
            if j > 0:
                new[j] += p_up * prob[j - 1]
            if j < 2 * n:
                new[j] += p_dn * prob[j + 1]
        if lo > 0:
            new[lo - 1] = 0.0
        if hi < 2 * n:
            new[hi + 1] = 0.0
        tmp = prob
        prob = new
        new = tmp
    # cells outside the final band may hold stale values from before the
    # barrier clamp (buffers alternate), so sum the band only
    lo = 0
    hi = n - tau if tau <= n else 2 * n
    for j in range(lo, hi + 1):
        total += prob[j]
    return total


def walk_batch_stats(steps, int tau, wtab, vtab, l1tab, l2tab):
    cdef const cnp.int8_t[:, ::1] st = np.ascontiguousarray(steps, dtype=np.int8)
    cdef const double[::1] wt = np.ascontiguousarray(wtab)
    cdef const double[::1] vt = np.ascontiguousarray(vtab)
    cdef const double[::1] l1 = np.ascontiguousarray(l1tab)
    cdef const double[::1] l2 = np.ascontiguousarray(l2tab)
    cdef Py_ssize_t r = st.shape[0]
    cdef Py_ssize_t n = st.shape[1] - 1
    cdef cnp.ndarray[cnp.int32_t, ndim=1] s_n = np.empty(r, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] exc = np.empty(r, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p_avg = np.empty(r)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_tail = np.empty(r)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v_avg = np.empty(r)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] seq_loss = np.empty(r)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] n_plus = np.empty(r, dtype=np.int32)
    cdef Py_ssize_t k, i, idx
    cdef int s
    cdef cnp.uint8_t ok
    cdef int plus
    cdef double wsum, vsum, lsum, wmax, w
    with nogil:
        for k in range(r):
            s = 0
            ok = 1
            plus = 0
            wsum = 0.0
            vsum = 0.0
            lsum = 0.0
            wmax = 0.0
            for i in range(n + 1):
                idx = s + n
                w = wt[idx]
                wsum += w
                vsum += vt[idx]
                if i >= tau:
                    if s > -tau:
                        ok = 0
                    if w > wmax:
                        wmax = w
                if st[k, i] > 0:
                    lsum += l1[idx]
                    plus += 1
                    if i < n:
                        s += 1
                else:
                    lsum += l2[idx]
                    if i < n:
                        s -= 1
            s_n[k] = s
            exc[k] = ok
            p_avg[k] = wsum / (n + 1)
            w_tail[k] = wmax
            v_avg[k] = vsum / (n + 1)
            seq_loss[k] = lsum
            n_plus[k] = plus
    return s_n, exc, p_avg, w_tail, v_avg, seq_loss, n_plus
