"""Time the numba kernels against the numpy fallbacks on the same inputs.

    python benchmarks/bench_kernels.py [--n 4000] [--repeat 3]

The first numba call of each kernel compiles (or loads the cache) and is
reported separately as warm-up.
"""
import argparse
import time

import numpy as np

from cauchyrect import _kernels


def _inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, size=(n, 2))
    w = rng.uniform(0.5, 1.5, size=n) / n
    f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    g = rng.standard_normal(n) + 0j
    radii = np.geomspace(0.01, 1.0, 8)
    return pts, w, f, g, radii


def _cases(pts, w, f, g, radii):
    x, y = pts[:, 0].copy(), pts[:, 1].copy()
    delta = 0.02
    return {
        "cauchy_sum": (x, y, x, y, f * w, delta),
        "tilde_sum": (x, y, x, y, w, 0.0, 3.0),
        "bilinear_rows": (x, y, f, g, w, delta),
        "disc_mass": (x[:512], y[:512], x, y, w, radii),
        "dense_kernel": (x, y, delta),
    }


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    cases = _cases(*_inputs(args.n))
    impls = sorted(_kernels.IMPLS)
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<14}" + "".join(f"{k:>12}" for k in impls) + f"{'speedup':>10}{'warm-up':>10}")
    for name, a in cases.items():
        row = {}
        warm = float("nan")
        for impl in impls:
            fn = _kernels.IMPLS[impl][name]
            if impl == "numba":
                t = time.perf_counter()
                fn(*a)
                warm = time.perf_counter() - t
            row[impl] = _time(fn, a, args.repeat)
        speed = row["numpy"] / row["numba"] if "numba" in row else float("nan")
        print(f"{name:<14}" + "".join(f"{row[k]:>12.4f}" for k in impls) + f"{speed:>10.1f}{warm:>10.3f}")


if __name__ == "__main__":
    main()
