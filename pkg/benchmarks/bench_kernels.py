"""Time the numba kernels against their numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both implementations are called directly, so one run compares them
regardless of ``XTALK_NUMBA``. With numba disabled the "numba" column times
the plain-Python loops instead.
"""

import argparse
import timeit

import numpy as np

from xtalk import kernels
from xtalk._accel import backend_name


def cubic_inputs(n, seed=0):
    # rho-cubic coefficients over a log-uniform (eta, sigma2) cloud
    rng = np.random.default_rng(seed)
    eta = 10 ** rng.uniform(-4, 8, n)
    s2 = rng.uniform(0.0, 10.0, n)
    c2 = -(eta - eta * s2 - 2.0)
    c1 = 1.0 - 2.0 * eta
    c0 = -(eta**2 * s2**2 + eta * s2 + eta)
    hi = 2.0 * (np.abs(c2) + np.abs(c1) + np.abs(c0)) ** (1 / 3) + 1.0
    return [np.ascontiguousarray(a) for a in (np.ones(n), c2, c1, c0, hi, 0.5 * hi)]


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    print(f"active backend: {backend_name()}")
    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'ratio':>8}")

    for n in (1_000, 100_000):
        a = cubic_inputs(n)
        kernels.cubic_positive_root_jit(*a)  # compile outside the timing
        t_jit = best(lambda: kernels.cubic_positive_root_jit(*a), args.repeat)
        t_np = best(lambda: kernels.cubic_positive_root_numpy(*a), args.repeat)
        print(f"{'cubic batch n=' + str(n):<28}{1e3 * t_jit:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_jit:>8.1f}")

    rng = np.random.default_rng(1)
    for n in (50, 200):
        var = rng.uniform(0.2, 0.5, (n, n)) * n / (n - 1)
        np.fill_diagonal(var, 0.0)
        fp = (var, 1e6, 0.5, 1e-12, 100_000, 1.0)
        kernels.fixed_point_jit(*fp)
        t_jit = best(lambda: kernels.fixed_point_jit(*fp), args.repeat)
        t_np = best(lambda: kernels.fixed_point_numpy(*fp), args.repeat)
        print(f"{'fixed point n=' + str(n):<28}{1e3 * t_jit:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_jit:>8.1f}")


if __name__ == "__main__":
    main()
