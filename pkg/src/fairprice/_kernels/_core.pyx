# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: DP Bellman pass and the UCB pricing loop.

Must stay bit-compatible with _fallback.py: same evaluation order, same
pairwise max semantics, same libm calls. See that module for the contracts.
"""
from libc.math cimport INFINITY, exp, sqrt

import numpy as np

BACKEND_NAME = "compiled"


def dp_forward(r_table, gamma):
    r_np = np.ascontiguousarray(r_table, dtype=np.float64)
    g_np = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[:, ::1] r = r_np
    cdef double[::1] g = g_np
    cdef Py_ssize_t M_u = r.shape[0]
    cdef Py_ssize_t M_p = r.shape[1]
    V_np = np.empty((M_u, M_p), dtype=np.float64)
    bp_np = np.zeros((M_u, M_p), dtype=np.int8)
    cdef double[:, ::1] V = V_np
    cdef signed char[:, ::1] bp = bp_np
    cdef Py_ssize_t k, j
    cdef double best, cand
    cdef signed char off
    for j in range(M_p):
        V[0, j] = g[0] * r[0, j]
    for k in range(1, M_u):
        for j in range(M_p):
            # scan candidates j-1, j, j+1; ties keep the smallest index
            if j > 0:
                best = V[k - 1, j - 1]
                off = -1
            else:
                best = -INFINITY
                off = 0
            cand = V[k - 1, j]
            if cand > best:
                best = cand
                off = 0
            if j + 1 < M_p:
                cand = V[k - 1, j + 1]
                if cand > best:
                    best = cand
                    off = 1
            V[k, j] = g[k] * r[k, j] + best
            bp[k, j] = off
    return V_np, bp_np


def ucb_phase2(u_true, u_hat, y_uniform, arms, r, n, double kappa2,
               double delta0_tilde, double p_lo, double p_hi, int link_id,
               double price_slope):
    ut_np = np.ascontiguousarray(u_true, dtype=np.float64)
    uh_np = np.ascontiguousarray(u_hat, dtype=np.float64)
    yu_np = np.ascontiguousarray(y_uniform, dtype=np.float64)
    arm_np = np.ascontiguousarray(arms, dtype=np.float64)
    cdef double[::1] ut = ut_np
    cdef double[::1] uh = uh_np
    cdef double[::1] yu = yu_np
    cdef double[::1] arm = arm_np
    cdef double[::1] r_v = r
    cdef long long[::1] n_v = n
    cdef Py_ssize_t T2 = ut.shape[0]
    cdef Py_ssize_t K = arm.shape[0]
    arm_idx_np = np.empty(T2, dtype=np.int64)
    prices_np = np.empty(T2, dtype=np.float64)
    ys_np = np.empty(T2, dtype=np.float64)
    cdef long long[::1] arm_idx = arm_idx_np
    cdef double[::1] prices = prices_np
    cdef double[::1] ys = ys_np
    cdef Py_ssize_t t, k, k_sel
    cdef double best, s, p, w, prob, e, y
    for t in range(T2):
        k_sel = -1
        for k in range(K):
            if n_v[k] == 0:
                k_sel = k
                break
        if k_sel < 0:
            best = -INFINITY
            for k in range(K):
                s = r_v[k] / n_v[k] + kappa2 / sqrt(<double>n_v[k])
                if s > best:
                    best = s
                    k_sel = k
        p = arm[k_sel] + delta0_tilde * uh[t]
        if p < p_lo:
            p = p_lo
        elif p > p_hi:
            p = p_hi
        w = ut[t] - price_slope * p
        if link_id == 0:
            prob = w
        elif link_id == 1:
            if w > 0.0:
                prob = 1.0 / (1.0 + exp(-w))
            else:
                e = exp(w)
                prob = e / (1.0 + e)
        else:
            prob = 1.0 - exp(-w) if w > 0.0 else 0.0
        if prob < 0.0:
            prob = 0.0
        elif prob > 1.0:
            prob = 1.0
        y = 1.0 if yu[t] < prob else 0.0
        r_v[k_sel] += y * p
        n_v[k_sel] += 1
        arm_idx[t] = k_sel
        prices[t] = p
        ys[t] = y
    return arm_idx_np, prices_np, ys_np
