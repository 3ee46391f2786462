#!/usr/bin/env python3
"""Micro-benchmark: compiled kernels vs the pure-Python (numpy) fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from igekit import kernels


def workloads(rng):
    boxes_a = np.hstack([rng.uniform(0, 900, (200, 2)), rng.uniform(2, 80, (200, 2))])
    boxes_b = np.hstack([rng.uniform(0, 900, (150, 2)), rng.uniform(2, 80, (150, 2))])
    nms_boxes = np.hstack([rng.uniform(0, 300, (400, 2)), rng.uniform(5, 120, (400, 2))])
    px = rng.uniform(0, 960, 100_000)
    py = rng.uniform(0, 540, 100_000)
    hit_boxes = np.hstack([rng.uniform(0, 900, (25, 2)), rng.uniform(10, 90, (25, 2))])
    return {
        "iou_matrix 200x150": lambda mod: mod.iou_matrix(boxes_a, boxes_b),
        "nms_keep 400 boxes": lambda mod: mod.nms_keep(nms_boxes, 0.7),
        "points_in_any_box 1e5x25": lambda mod: mod.points_in_any_box(px, py, hit_boxes),
        "first_hit_index 1e5x25": lambda mod: mod.first_hit_index(px, py, hit_boxes),
    }


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    mods = kernels.backends()
    if "compiled" not in mods:
        print("compiled kernels not built; showing pure-python timings only")

    rng = np.random.default_rng(0)
    work = workloads(rng)
    names = sorted(mods)
    width = max(len(k) for k in work)
    header = f"{'workload'.ljust(width)}  " + "  ".join(f"{n:>14}" for n in names)
    if len(names) == 2:
        header += f"  {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for label, fn in work.items():
        times = {}
        for name in names:
            mod = mods[name]
            fn(mod)  # warmup
            times[name] = min(timeit.repeat(lambda: fn(mod), number=3,
                                            repeat=args.repeat)) / 3
        row = f"{label.ljust(width)}  " + "  ".join(
            f"{times[n] * 1e3:>11.3f} ms" for n in names)
        if len(names) == 2:
            row += f"  {times['pure-python'] / times['compiled']:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
