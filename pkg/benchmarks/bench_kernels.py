"""Compare the compiled kernels against the pure-Python fallback.

Runs each hot kernel on representative workloads under both backends and
prints per-call timings plus the speedup ratio. Results from the two
backends are also cross-checked for equality, so a run doubles as a
parity smoke test.

Usage:
    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeat 9 --only median,assignment
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from checkout import kernels


@dataclass(frozen=True)
class Workload:
    name: str
    # build() -> args tuple; run(impl, *args) -> result used for parity check
    build: Callable[[np.random.Generator], tuple]
    run: Callable[..., object]


def _median_args(rng):
    return (rng.integers(0, 256, (60, 480, 640), dtype=np.uint8),)


def _mask_args(rng):
    return ((rng.random((480, 640)) < 0.4).astype(np.uint8),)


def _iou_args(rng):
    def boxes(n):
        x = rng.uniform(0, 600, n)
        y = rng.uniform(0, 440, n)
        w = rng.uniform(4, 40, n)
        h = rng.uniform(4, 40, n)
        return np.stack([x, y, w, h], axis=1)

    return boxes(200), boxes(200)


def _nms_args(rng):
    a, _ = _iou_args(rng)
    return a, rng.random(200), rng.integers(1, 6, 200), 0.5


def _assignment_args(rng):
    return (rng.uniform(0, 100, (40, 40)),)


def _blur_args(rng):
    return rng.integers(0, 256, (480, 640), dtype=np.uint8), 5


WORKLOADS = [
    Workload("median", _median_args, lambda impl, stack: kernels.median_stack(stack, impl=impl)),
    Workload("erode", _mask_args, lambda impl, mask: kernels.erode(mask, 2, impl=impl)),
    Workload("dilate", _mask_args, lambda impl, mask: kernels.dilate(mask, 4, impl=impl)),
    Workload("label", _mask_args, lambda impl, mask: kernels.label_components(mask, impl=impl)[0]),
    Workload("fill", _mask_args, lambda impl, mask: kernels.fill_holes(mask, impl=impl)),
    Workload("iou", _iou_args, lambda impl, a, b: kernels.iou_matrix(a, b, impl=impl)),
    Workload(
        "nms",
        _nms_args,
        lambda impl, boxes, scores, classes, thr: kernels.nms_keep(
            boxes, scores, classes, thr, impl=impl
        ),
    ),
    Workload(
        "assignment",
        _assignment_args,
        lambda impl, cost: kernels.solve_assignment(cost, impl=impl),
    ),
    Workload("blur", _blur_args, lambda impl, img, k: kernels.box_blur(img, k, impl=impl)),
]


def _best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        return False
    if a.dtype.kind == "f" or b.dtype.kind == "f":
        return bool(np.allclose(a, b, rtol=1e-12, atol=1e-12))
    return bool(np.array_equal(a, b))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5, help="timed repeats, best kept")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--only", help="comma-separated workload names")
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    if "native" not in backends:
        print("note: compiled backend unavailable, timing fallback only")
    selected = set(args.only.split(",")) if args.only else None

    header = f"{'kernel':<12}" + "".join(f"{name:>12}" for name in sorted(backends))
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for load in WORKLOADS:
        if selected is not None and load.name not in selected:
            continue
        rng = np.random.default_rng(args.seed)
        inputs = load.build(rng)
        times = {}
        results = {}
        for name in sorted(backends):
            impl = backends[name]
            results[name] = load.run(impl, *inputs)
            times[name] = _best_of(lambda: load.run(impl, *inputs), args.repeat)
        row = f"{load.name:<12}" + "".join(
            f"{times[name] * 1e3:>10.2f}ms" for name in sorted(backends)
        )
        if len(times) == 2:
            row += f"{times['fallback'] / times['native']:>9.1f}x"
            if not _same(results["fallback"], results["native"]):
                row += "  MISMATCH"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
