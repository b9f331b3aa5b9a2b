"""Time the full pipeline on in-memory synthetic tiles of increasing size.

Usage: python3 scripts/benchmark.py [--points 1000000 10000000] [--repeats 3]
"""

import argparse
import time

from urbanlabel.pipeline import run_tile
from urbanlabel.synthgen import build_scene, perf_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, nargs="+", default=[1_000_000, 10_000_000])
    ap.add_argument("--repeats", type=int, default=3, help="best-of count per size")
    args = ap.parse_args()
    base = None
    for target in args.points:
        scene = build_scene(perf_spec(target))
        n = len(scene.truth)
        best, timings = float("inf"), {}
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            _, rep = run_tile(scene.unlabelled(), scene.ground, scene.roof, scene.topo)
            dt = time.perf_counter() - t0
            if dt < best:
                best, timings = dt, rep.timings
        per_point = best / n
        base = base or per_point
        modules = " ".join(f"{k}={v:.2f}" for k, v in timings.items())
        print(f"points {n} seconds {best:.2f} rate {n / best / 1e6:.2f}M/s "
              f"per_point_ratio {per_point / base:.3f} [{modules}]")
        del scene


if __name__ == "__main__":
    main()
