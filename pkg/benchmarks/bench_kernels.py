"""Benchmark the compiled and NumPy kernel backends against each other.

Usage::

    python3 benchmarks/bench_kernels.py [--repeats 7] [--frames 200]

For each kernel the script warms both backends up (which also triggers
JIT compilation), verifies their outputs are bit-identical on the
benchmark inputs, then reports mean +/- std wall time per call.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from lane3d import kernels


def random_lane(rng, n):
    y = np.sort(rng.uniform(0.0, 100.0, n))
    x = rng.normal(0.0, 3.0, n)
    z = rng.normal(0.0, 0.3, n)
    return np.column_stack([x, y, z])


def time_call(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    mean = statistics.fmean(times)
    std = statistics.stdev(times) if len(times) > 1 else 0.0
    return mean, std


def fmt(mean, std):
    return f"{mean * 1e3:9.3f} ms +/- {std * 1e3:7.3f}"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--frames", type=int, default=200,
                        help="frame count for the pair-matrix benchmark")
    parser.add_argument("--points", type=int, default=100)
    args = parser.parse_args()

    if not kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(2024)
    a = random_lane(rng, 5000)
    b = random_lane(rng, 5000)
    poly = random_lane(rng, 400)
    lanes_per_frame = 6
    frame_sets = [
        (
            [random_lane(rng, args.points) for _ in range(lanes_per_frame)],
            [random_lane(rng, args.points) for _ in range(lanes_per_frame)],
        )
        for _ in range(args.frames)
    ]

    cases = {
        "directed_point_stats (5000 vs 5000 pts)": {
            name: (lambda n=name: kernels.directed_point_stats(a, b, backend=n))
            for name in ("numba", "numpy")
        },
        "point_to_polyline_stats (5000 pts, 400-pt chain)": {
            name: (lambda n=name: kernels.point_to_polyline_stats(
                a, poly, backend=n))
            for name in ("numba", "numpy")
        },
        f"pair_mean_matrices ({args.frames} frames, 6x6 lanes)": {
            name: (lambda n=name: [
                kernels.pair_mean_matrices(p, g, backend=n)
                for p, g in frame_sets
            ])
            for name in ("numba", "numpy")
        },
        "resample_polyline (400 -> 100 pts, x1000)": {
            name: (lambda n=name: [
                kernels.resample_polyline(poly, 100, backend=n)
                for _ in range(1000)
            ])
            for name in ("numba", "numpy")
        },
    }

    checks = [
        lambda n: kernels.directed_point_stats(a, b, backend=n),
        lambda n: kernels.point_to_polyline_stats(a, poly, backend=n),
        lambda n: tuple(
            arr.tobytes()
            for pair in (kernels.pair_mean_matrices(*frame_sets[0], backend=n),)
            for arr in pair
        ),
        lambda n: kernels.resample_polyline(poly, 100, backend=n).tobytes(),
    ]
    for check in checks:
        assert check("numba") == check("numpy"), "backends disagree!"
    print("bit-identity check: both backends agree on all benchmark inputs\n")

    width = max(len(k) for k in cases)
    for label, impls in cases.items():
        for fn in impls.values():
            fn()  # warm-up / JIT
        line = [label.ljust(width)]
        results = {}
        for name, fn in impls.items():
            results[name] = time_call(fn, args.repeats)
            line.append(f"{name}: {fmt(*results[name])}")
        ratio = results["numpy"][0] / results["numba"][0]
        line.append(f"speedup x{ratio:5.1f}")
        print("  ".join(line))


if __name__ == "__main__":
    main()
