"""Time the flow velocity kernel: numpy vs numba.

    python benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 20]

Both backends are imported in one process, so ``LAGFLOW_NUMBA`` does not
matter here. ``LAGFLOW_THREADS`` caps the numba thread count. The first numba
call (compilation, or loading from the cache) is excluded from the timings.
"""

import argparse
import statistics
import time

import numpy as np

from lagflow import _kernels
from lagflow.torusmap import Shear, TrigPoly, make_shear_composition

SHEARS = [Shear("x", 0.1, TrigPoly((1.0,))), Shear("y", 0.1, TrigPoly((1.0,)))]


def timed(fn, args, repeat):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        out.append(time.perf_counter() - t0)
    return statistics.median(out)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args()

    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'n':>5} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>8} {'max |diff|':>11}")
    for n in args.sizes:
        fmap = make_shear_composition(SHEARS, n)
        a = (fmap.disp, fmap.linear.astype(float), fmap.h)
        v_np = _kernels.velocity_numpy(*a)[0]
        v_nb = _kernels.velocity_numba(*a)[0]  # warm-up
        t_np = timed(_kernels.velocity_numpy, a, args.repeat)
        t_nb = timed(_kernels.velocity_numba, a, args.repeat)
        diff = float(np.max(np.abs(v_np - v_nb)))
        print(f"{n:5d} {1e3 * t_np:12.3f} {1e3 * t_nb:12.3f} {t_np / t_nb:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
