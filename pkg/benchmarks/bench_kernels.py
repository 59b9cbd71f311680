"""Benchmark the jitted recursion kernels against the numpy/scipy fallback.

Usage:  python benchmarks/bench_kernels.py [--repeats 50]

Times the variance-recursion likelihood and the correlation-recursion
likelihood at rolling-window sizes, for both implementation paths (the same
functions the library selects between via the LIQCOV_NO_NUMBA environment
flag), and reports the per-call time and speedup.
"""

import argparse
import time

import numpy as np

from liqcov import _kernels as k


def time_call(fn, args, repeats):
    fn(*args)                       # warmup (and JIT compile)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def garch_case(rng, n):
    eps2 = rng.uniform(0.0, 2.0, n)
    return (eps2, 0.05, 0.08, 0.88, 1.0)


def corr_case(rng, n, dim):
    xi = rng.standard_normal((n, dim))
    neg = np.where(xi < 0, xi, 0.0)
    second = xi.T @ xi / n
    d = np.sqrt(np.diag(second))
    obar = second / np.outer(d, d)
    np.fill_diagonal(obar, 1.0)
    nbar = neg.T @ neg / n
    return (
        np.ascontiguousarray(xi), np.ascontiguousarray(neg),
        np.ascontiguousarray(obar), np.ascontiguousarray(nbar),
        0.05, 0.90, 0.02,
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()
    rng = np.random.default_rng(1)

    cases = [
        ("garch loglik n=365", k._garch11_negloglik_jit, k._garch11_negloglik_numpy,
         garch_case(rng, 365)),
        ("garch loglik n=10000", k._garch11_negloglik_jit, k._garch11_negloglik_numpy,
         garch_case(rng, 10_000)),
        ("corr loglik n=365 N=8", k._corr_negloglik_jit, k._corr_negloglik_numpy,
         corr_case(rng, 365, 8)),
        ("corr loglik n=3000 N=2", k._corr_negloglik_jit, k._corr_negloglik_numpy,
         corr_case(rng, 3000, 2)),
        ("corr loglik n=365 N=15", k._corr_negloglik_jit, k._corr_negloglik_numpy,
         corr_case(rng, 365, 15)),
    ]

    print(f"numba available: {k.HAVE_NUMBA}; selected path: "
          f"{'numba' if k.USE_NUMBA else 'numpy'}")
    print(f"{'case':<26} {'numba':>12} {'numpy':>12} {'speedup':>9}")
    for name, jit_fn, np_fn, case_args in cases:
        t_np = time_call(np_fn, case_args, args.repeats)
        if jit_fn is not None:
            t_jit = time_call(jit_fn, case_args, args.repeats)
            print(f"{name:<26} {t_jit * 1e6:>10.1f}us {t_np * 1e6:>10.1f}us "
                  f"{t_np / t_jit:>8.1f}x")
        else:
            print(f"{name:<26} {'n/a':>12} {t_np * 1e6:>10.1f}us {'':>9}")


if __name__ == "__main__":
    main()
