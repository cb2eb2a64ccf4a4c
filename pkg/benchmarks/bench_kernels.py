"""Timing comparison of the compiled and fallback iteration kernels.

Runs each kernel through both implementations on identical inputs,
checks the outputs are bit-identical, and prints the speedup. The
compiled path includes a warmup call so JIT time is not billed.

Usage: python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from fieldosc import kernels_numba, kernels_numpy


def timed(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main():
    rng = np.random.default_rng(7)
    m = 10
    x0 = rng.uniform(0.0, 0.1, size=m)
    g = -0.01 - rng.uniform(0.0, 3e-3, size=m)
    gtilde = np.full(m, -0.01)

    cases = [
        ("iterate_solo", (0.1, 3.1, 200_000, 64)),
        ("iterate_pair", (0.1, -0.1, 3.1, 0.05, 200_000, 64)),
        ("iterate_delayed", (0.1, 3.1, 0.138, 0.15, 200_000, 64)),
        ("iterate_swarm", (x0, g, 3.1, 200_000, 2.0, 2, 0, gtilde)),
    ]

    print(f"{'kernel':<16} {'numpy':>10} {'numba':>10} {'speedup':>9}  bit-equal")
    for name, args in cases:
        fn_nb = getattr(kernels_numba, name)
        fn_np = getattr(kernels_numpy, name)
        fn_nb(*args)  # warmup / compile
        ref, t_np = timed(fn_np, *args)
        out, t_nb = timed(fn_nb, *args)
        same = np.array_equal(ref, out)
        print(f"{name:<16} {t_np:>9.4f}s {t_nb:>9.4f}s {t_np / t_nb:>8.1f}x  {same}")
        if not same:
            raise SystemExit(f"{name}: backend outputs differ")


if __name__ == "__main__":
    main()
