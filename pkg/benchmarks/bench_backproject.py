"""Compare the compiled and pure-numpy backprojection kernels.

Usage: python benchmarks/bench_backproject.py [--M 200] [--pixels 200] [--threads 1] [--repeat 3]
"""

import argparse
import time

import numpy as np

from sarkit.imaging import backproject, ground_grid
from sarkit.rangeproc import RangeProfile
from sarkit.scene import linear_trajectory
from sarkit.waveform import OfdmParams


def _setup(M, pixels):
    p = OfdmParams()
    rng = np.random.default_rng(0)
    L = p.N * 8
    cell = 299792458.0 / (2 * p.B * 8)
    profiles = [RangeProfile(rng.standard_normal(L) + 1j * rng.standard_normal(L), cell, "monostatic",
                             m, 8, p.B, float(p.N)) for m in range(M)]
    tx = linear_trajectory([-M / 200, 0, 10], [1.0, 0, 0], p.f_prf, M)
    grid = ground_grid((-2, 2), (5, 25), 4 / (pixels - 1), 20 / (pixels - 1))
    return p, profiles, tx, grid


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=200)
    ap.add_argument("--pixels", type=int, default=200)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    p, profiles, tx, grid = _setup(args.M, args.pixels)
    work = args.M * grid.Nu * grid.Nv
    results = {}
    for backend in ("python", "cython"):
        try:
            t = _time(lambda: backproject(profiles, tx, None, grid, p, backend=backend,
                                          threads=args.threads), args.repeat)
        except ImportError:
            print(f"{backend:>7}: not available")
            continue
        results[backend] = t
        print(f"{backend:>7}: {t * 1e3:9.1f} ms  {work / t / 1e6:8.1f} Mpix-meas/s")
    if len(results) == 2:
        print(f"speed-up: {results['python'] / results['cython']:.1f}x")


if __name__ == "__main__":
    main()
