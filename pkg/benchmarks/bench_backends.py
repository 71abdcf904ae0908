"""Time the compiled and numpy texel-selection backends on identical inputs.

    python3 benchmarks/bench_backends.py [--n 200000] [--repeat 5]

Prints one row per kernel with the best-of-N wall time per backend, the
speedup, and whether both backends returned identical selections.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from stochtex import backend

CASES = {
    "bilinear": lambda k, a: k.bilinear(a["st"], a["xi"]),
    "trilinear": lambda k, a: k.trilinear(a["p3"], a["xi"]),
    "bicubic_bspline": lambda k, a: k.bicubic_bspline(a["st"], a["xi"]),
    "tricubic_bspline": lambda k, a: k.tricubic_bspline(a["p3"], a["xi"]),
    "mitchell_positivized": lambda k, a: k.mitchell_positivized(a["st"], a["xi"], -0.5),
    "discrete_gaussian": lambda k, a: k.discrete_gaussian(a["st"], 0.5, a["xi"]),
    "ewa": lambda k, a: k.ewa(a["st"], a["d0"], a["d1"], a["xi"]),
    "nearest": lambda k, a: k.nearest(a["st"]),
}


def make_inputs(n: int, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0, np.pi, n)
    major = rng.uniform(1.0, 6.0, n)[:, None]
    minor = rng.uniform(0.5, 1.0, n)[:, None]
    return {
        "st": rng.uniform(0, 256, (n, 2)),
        "p3": rng.uniform(0, 64, (n, 3)),
        "xi": rng.random(n),
        "d0": np.ascontiguousarray(major * np.column_stack([np.cos(ang), np.sin(ang)])),
        "d1": np.ascontiguousarray(minor * np.column_stack([-np.sin(ang), np.cos(ang)])),
    }


def best_time(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=200_000, help="lookups per call")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if backend.compiled is None:
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation` first")
    inputs = make_inputs(args.n)
    py, cy = backend.get("python"), backend.get("cython")
    print(f"{args.n} lookups per call, best of {args.repeat}")
    print(f"{'kernel':<22}{'python ms':>11}{'cython ms':>11}{'speedup':>9}  identical")
    for name, call in CASES.items():
        tp, rp = best_time(lambda: call(py, inputs), args.repeat)
        tc, rc = best_time(lambda: call(cy, inputs), args.repeat)
        print(f"{name:<22}{1e3 * tp:>11.2f}{1e3 * tc:>11.2f}{tp / tc:>8.1f}x  {same(rp, rc)}")


if __name__ == "__main__":
    main()
