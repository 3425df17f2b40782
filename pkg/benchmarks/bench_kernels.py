"""Compare the pure-numpy and compiled kernel backends.

Checks bit-identical outputs on representative workloads, then times both.
Run as `python3 benchmarks/bench_kernels.py`; if the compiled core did not
build, the script says so and exits cleanly (nothing to compare).
"""
import argparse
import time

import numpy as np

from fairprice._kernels import _fallback

try:
    from fairprice._kernels import _core
except ImportError:
    _core = None


def bench(fn, *args, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def dp_case(rng, M_u, M_p):
    r_table = rng.random((M_u, M_p))
    gamma = rng.random(M_u)
    gamma /= gamma.sum()
    return r_table, gamma


def ucb_case(rng, T2, K):
    u_true = rng.uniform(0.2, 1.5, T2)
    u_hat = u_true + rng.normal(0, 0.05, T2)
    y_uniform = rng.random(T2)
    arms = np.linspace(0.0, 1.0, K)
    return (u_true, u_hat, y_uniform, arms, np.zeros(K),
            np.zeros(K, dtype=np.int64), 1.5, 0.25, 0.0, 2.0, 1, 0.5)


def run_dp(rng, M_u, M_p):
    r_table, gamma = dp_case(rng, M_u, M_p)
    (v_p, bp_p), t_pure = bench(_fallback.dp_forward, r_table, gamma)
    (v_c, bp_c), t_comp = bench(_core.dp_forward, r_table, gamma)
    assert np.array_equal(v_p, v_c), "dp_forward value tables differ"
    assert np.array_equal(bp_p, bp_c), "dp_forward backpointers differ"
    return t_pure, t_comp


def run_ucb(rng, T2, K):
    args = ucb_case(rng, T2, K)

    def fresh(impl):
        a = [x.copy() if isinstance(x, np.ndarray) else x for x in args]
        return impl.ucb_phase2(*a)

    (out_p, t_pure) = bench(lambda: fresh(_fallback))
    (out_c, t_comp) = bench(lambda: fresh(_core))
    for x, y, name in zip(out_p, out_c, ("arm", "price", "y")):
        assert np.array_equal(x, y), f"ucb_phase2 {name} arrays differ"
    return t_pure, t_comp


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if _core is None:
        print("compiled backend not built; nothing to compare")
        return

    rng = np.random.default_rng(args.seed)
    print(f"{'case':30s} {'pure':>11s} {'compiled':>11s} {'speedup':>8s}")
    for M_u, M_p in ((100, 500), (400, 2000), (1000, 5000)):
        t_p, t_c = run_dp(rng, M_u, M_p)
        print(f"{f'dp_forward {M_u}x{M_p}':30s} {t_p*1e3:9.2f}ms "
              f"{t_c*1e3:9.2f}ms {t_p/t_c:7.1f}x")
    for T2, K in ((10_000, 20), (100_000, 50)):
        t_p, t_c = run_ucb(rng, T2, K)
        print(f"{f'ucb_phase2 T2={T2} K={K}':30s} {t_p*1e3:9.2f}ms "
              f"{t_c*1e3:9.2f}ms {t_p/t_c:7.1f}x")
    print("all outputs bit-identical across backends")


if __name__ == "__main__":
    main()
