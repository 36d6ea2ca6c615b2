"""Time the compiled Hilbert sort against the numpy fallback.

The compiled core sorts packed 64-bit keys when they fit; the ``cmp`` column
times its early-exit comparison sort on the same input.

Usage: python3 benchmarks/bench_sfc.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from sfcdd import sfc
from sfcdd.sfc import HAVE_COMPILED, SfcOrdering, grid_indices, sfc_argsort

CASES = [(14,), (16,), (7, 7), (9, 9), (4, 5, 6), (3, 3, 3, 3, 3, 3)]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["compiled", "cmp"] if HAVE_COMPILED else [])
    print(f"{'levels':<22}{'N':>9}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for levels in CASES:
        idx = grid_indices(levels)
        o = SfcOrdering(levels)
        coords = o.embed_array(idx)
        run = {
            "numpy": lambda: sfc_argsort(idx, o, backend="numpy"),
            "compiled": lambda: sfc_argsort(idx, o, backend="compiled"),
            "cmp": lambda: sfc._sfc_core.argsort(coords, o.resolution, comparison=True),
        }
        perms = [run[b]() for b in backends]
        assert all(np.array_equal(perms[0], p) for p in perms[1:])
        t = {b: best_of(run[b], args.repeat) for b in backends}
        speed = f"{t['numpy'] / t['compiled']:>9.1f}x" if "compiled" in t else f"{'n/a':>10}"
        print(f"{str(levels):<22}{len(idx):>9}" + "".join(f"{t[b]:>11.4f}s" for b in backends) + speed)


if __name__ == "__main__":
    main()
