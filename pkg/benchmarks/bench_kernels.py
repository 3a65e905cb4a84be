"""Compare the compiled and NumPy backends on the two hot kernels.

Usage::

    python benchmarks/bench_kernels.py [--sizes 2:65 2:129 3:17] [--repeat 5] [--threads 1]

For each ``d:n`` case the script times the coefficient convolution and one
application of the discrete operator with both backends, checks that the
results agree, and prints a table with the speedup.
"""

import argparse
import time

import numpy as np

from landau_apriori import _core_py
from landau_apriori.coefficients import KernelParams, kernel_tables
from landau_apriori.grid import VelocityGrid, maxwellian

try:
    from landau_apriori import _core
except ImportError:  # extension not built
    _core = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def bench_case(d, n, repeat, threads, gamma=-1.0):
    grid = VelocityGrid(d, 8.0, n)
    tables = np.asarray(kernel_tables(grid, KernelParams(gamma)))
    f = np.ascontiguousarray(maxwellian(grid).values.reshape(-1))
    abar = np.ascontiguousarray(np.tile(np.eye(d).reshape(-1, 1), (1, grid.size)))
    cbar = np.ones(grid.size)

    rows = []
    kernels = {
        "convolve": lambda impl: impl.convolve(tables, f, d, n, threads),
        "apply_operator": lambda impl: impl.apply_operator(f, abar, cbar, d, n, grid.h),
    }
    for name, call in kernels.items():
        t_py, ref = best_of(lambda: call(_core_py), repeat)
        if _core is None:
            rows.append((d, n, name, t_py, float("nan"), float("nan"), float("nan")))
            continue
        t_c, out = best_of(lambda: call(_core), repeat)
        err = float(np.max(np.abs(out - ref)) / max(np.max(np.abs(ref)), 1e-300))
        rows.append((d, n, name, t_py, t_c, t_py / t_c, err))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", nargs="+", default=["1:257", "2:65", "2:129", "3:17", "3:25"])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)

    if _core is None:
        print("compiled extension not available; timing the NumPy backend only")
    print(f"{'d':>2} {'n':>5} {'kernel':<15} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'rel diff':>9}")
    for spec in args.sizes:
        d, n = (int(x) for x in spec.split(":"))
        for d_, n_, name, t_py, t_c, speedup, err in bench_case(d, n, args.repeat, args.threads):
            print(f"{d_:>2} {n_:>5} {name:<15} {t_py:>11.4f} {t_c:>13.4f} {speedup:>8.1f} {err:>9.1e}")


if __name__ == "__main__":
    main()
