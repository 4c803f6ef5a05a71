"""Compare the compiled and NumPy interpolation kernels used by the Bohm integrator.

Usage: python3 benchmarks/bench_kernels.py [--points N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from emwf._kernels import BACKENDS


def make_problem(n_points, shape=(1, 4096, 1, 1), seed=0):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    spacing = np.array([0.01, 1.0, 1.0])
    origin = np.array([-20.48, 0.0, 0.0])
    pts = np.zeros((n_points, 3))
    pts[:, 0] = rng.uniform(-20.0, 20.0, n_points)
    return values, origin, spacing, pts


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    problem = make_problem(args.points)
    results = {}
    for name, mod in sorted(BACKENDS.items()):
        out = mod.interp_periodic(*problem, 6)
        t = min(timeit.repeat(lambda: mod.interp_periodic(*problem, 6), number=1, repeat=args.repeat))
        results[name] = (t, out)
        print(f"{name:8s} {t * 1e3:9.3f} ms   {t / args.points * 1e9:8.1f} ns/point")
    if len(results) == 2:
        (tp, op), (tc, oc) = results["python"], results["cython"]
        print(f"speedup  {tp / tc:9.2f}x   max |difference| {np.max(np.abs(op - oc)):.3e}")
    else:
        print("compiled backend not built; only the NumPy fallback was timed")


if __name__ == "__main__":
    main()
