"""Pure numpy/Python reference implementations of the hot kernels.

These are the semantics the compiled Cython kernels must reproduce bit for
bit. All randomness is drawn by the caller beforehand (context utilities and
Bernoulli uniforms arrive as arrays), and the only transcendental used inside
the loop is math.exp -- the same libm exp the C kernel calls -- so a fixed
seed yields byte-identical traces on either backend.
"""
import math

import numpy as np

BACKEND_NAME = "pure"

_NEG_INF = float("-inf")


def dp_forward(r_table, gamma):
    """Forward Bellman pass over utility cells.

    r_table : (M_u, M_p) revenue of price j at utility cell k
    gamma   : (M_u,) cell probabilities

    Returns (V, bp): V[k, j] is the best value of any admissible price-index
    chain ending at j after cell k; bp[k, j] in {-1, 0, +1} is the offset of
    the chosen predecessor (ties prefer the smallest price index, scanned in
    the order j-1, j, j+1).
    """
    r_table = np.ascontiguousarray(r_table, dtype=np.float64)
    gamma = np.ascontiguousarray(gamma, dtype=np.float64)
    M_u, M_p = r_table.shape
    V = np.empty((M_u, M_p))
    bp = np.zeros((M_u, M_p), dtype=np.int8)
    V[0] = gamma[0] * r_table[0]
    for k in range(1, M_u):
        prev = V[k - 1]
        left = np.empty(M_p)
        left[0] = _NEG_INF
        left[1:] = prev[:-1]
        right = np.empty(M_p)
        right[-1] = _NEG_INF
        right[:-1] = prev[1:]
        best = np.maximum(np.maximum(left, prev), right)
        bp[k] = np.where(left == best, -1,
                         np.where(prev == best, 0, 1)).astype(np.int8)
        V[k] = gamma[k] * r_table[k] + best
    return V, bp


def ucb_phase2(u_true, u_hat, y_uniform, arms, r, n, kappa2, delta0_tilde,
               p_lo, p_hi, link_id, price_slope):
    """Per-period UCB pricing loop (phase 2 of the bandit).

    u_true      : (T2,) true baseline utilities x_t'theta0
    u_hat       : (T2,) estimated utilities x_t'theta_hat
    y_uniform   : (T2,) pre-drawn uniforms deciding the Bernoulli demands
    arms        : (K,) starting prices
    r, n        : (K,) revenue sums and pull counts, updated in place
    link_id     : 0 linear, 1 logistic, 2 exponential
    price_slope : price_coeff * alpha0

    Returns (arm_idx, prices, ys). The Bernoulli success probability is
    f(u_true - price_slope * price) clamped into [0, 1].
    """
    T2 = len(u_true)
    K = len(arms)
    arm_idx = np.empty(T2, dtype=np.int64)
    prices = np.empty(T2)
    ys = np.empty(T2)
    # plain python lists index several times faster than ndarrays here
    ut = u_true.tolist()
    uh = u_hat.tolist()
    yu = y_uniform.tolist()
    arm_l = arms.tolist()
    r_l = r.tolist()
    n_l = n.tolist()
    exp = math.exp
    sqrt = math.sqrt
    for t in range(T2):
        k_sel = -1
        for k in range(K):
            if n_l[k] == 0:
                k_sel = k
                break
        if k_sel < 0:
            best = _NEG_INF
            for k in range(K):
                s = r_l[k] / n_l[k] + kappa2 / sqrt(n_l[k])
                if s > best:
                    best = s
                    k_sel = k
        p = arm_l[k_sel] + delta0_tilde * uh[t]
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
        r_l[k_sel] += y * p
        n_l[k_sel] += 1
        arm_idx[t] = k_sel
        prices[t] = p
        ys[t] = y
    r[:] = r_l
    n[:] = n_l
    return arm_idx, prices, ys
