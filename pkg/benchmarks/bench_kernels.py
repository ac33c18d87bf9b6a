"""Compare the compiled and pure-Python kernels on realistic inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--csv out.csv]
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from treekp import _backend, augment, keypoints, pipeline
from treekp.augment import SynthParams


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads():
    img = augment.generate_dendrite(SynthParams(rng_seed=42))
    ex = pipeline.extract(img)
    mask = ex.mask.astype(np.uint8)
    skel = ex.skeleton.astype(np.uint8)
    seeds, _ = keypoints.seed_points(ex.skeleton, ex.geometry)
    seeds = np.asarray(seeds, dtype=np.int64).reshape(-1, 2)
    cost = np.random.default_rng(0).random((300, 300))
    return {
        "thin 512x512": lambda k: k.thin_kernel(mask),
        "trace 512x512": lambda k: k.trace_kernel(skel, seeds, 10**7),
        "munkres 300x300": lambda k: k.munkres_kernel(cost),
        "dla 2000 particles": lambda k: k.dla_kernel(2000, 512, 1.0, np.random.default_rng(42)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--csv", help="also write the table here")
    args = ap.parse_args(argv)

    py = _backend.get_kernels("python")
    try:
        cy = _backend.get_kernels("cython")
    except ImportError:
        sys.exit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    rows = []
    for name, fn in workloads().items():
        t_cy = best_of(lambda: fn(cy), args.repeat)
        t_py = best_of(lambda: fn(py), args.repeat)
        rows.append((name, t_cy, t_py, t_py / t_cy))
        print(f"{name:20s} cython {t_cy * 1e3:9.2f} ms  python {t_py * 1e3:10.2f} ms  speed-up {t_py / t_cy:7.1f}x")

    t0 = time.perf_counter()
    pipeline.extract(augment.generate_dendrite(SynthParams(rng_seed=7)))
    print(f"full extract (active backend: {_backend.BACKEND}): {time.perf_counter() - t0:.3f} s")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kernel", "cython_s", "python_s", "speedup"])
            w.writerows((n, f"{a:.6f}", f"{b:.6f}", f"{c:.2f}") for n, a, b, c in rows)


if __name__ == "__main__":
    main()
