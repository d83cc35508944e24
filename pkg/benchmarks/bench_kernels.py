"""Compare the numba and numpy B-spline design-matrix kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--points 20000] [--basis 30] [--repeat 20]

Both kernels are called directly, so the environment flag that picks the
default path does not matter here. The first numba call (compilation) is
excluded from the timings.
"""

import argparse
import time

import numpy as np

from mfcharts._kernels import HAS_NUMBA, design_matrix_numba, design_matrix_numpy
from mfcharts.basis import DEGREE, BSplineBasis


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.median(times))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--basis", type=int, default=30)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    basis = BSplineBasis(0.0, 1.0, args.basis)
    knots = np.ascontiguousarray(basis.knots)
    x = np.sort(np.random.default_rng(0).uniform(0.0, 1.0, args.points))

    print(f"points={args.points} n_basis={args.basis} repeat={args.repeat}")
    print(f"{'deriv':>5} {'numpy best':>12} {'numba best':>12} {'speedup':>8} {'max |diff|':>11}")
    for deriv in (0, 2):
        ref = design_matrix_numpy(knots, DEGREE, x, deriv)
        t_np, _ = best_of(lambda: design_matrix_numpy(knots, DEGREE, x, deriv), args.repeat)
        if HAS_NUMBA:
            out = design_matrix_numba(knots, DEGREE, x, deriv)  # compile
            t_nb, _ = best_of(lambda: design_matrix_numba(knots, DEGREE, x, deriv), args.repeat)
            diff = float(np.max(np.abs(out - ref)))
            print(f"{deriv:>5} {t_np * 1e3:>10.2f}ms {t_nb * 1e3:>10.2f}ms {t_np / t_nb:>7.1f}x {diff:>11.2e}")
        else:
            print(f"{deriv:>5} {t_np * 1e3:>10.2f}ms {'n/a':>12} {'n/a':>8} {'n/a':>11}")


if __name__ == "__main__":
    main()
