"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py            # default sizes
    python benchmarks/bench_kernels.py --quick    # smaller inputs, fewer repeats
    python benchmarks/bench_kernels.py --json out.json

Inputs mirror what the pipeline feeds each kernel: a 300 s, 30 fps video
with 550 kept rows per frame, a 3600 s reference log, a 55-row matrix of
per-row means.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import timeit
from dataclasses import asdict, dataclass

import numpy as np

from rsenf.kernels import available_backends


@dataclass
class Timing:
    kernel: str
    backend: str
    median_ms: float
    best_ms: float


def _cases(rng: np.random.Generator, quick: bool):
    frames = 1800 if quick else 9000
    rows = 550
    samples = rng.normal(size=frames * rows)
    ref = np.cumsum(rng.normal(size=3600 if not quick else 900)) * 1e-3 + 50.0
    query = ref[300:581] + rng.normal(0, 1e-3, 281)
    return {
        "demodulate_frames": (samples, 70.0 / (30.0 * rows), rows),
        "fill_idle_gaps": (samples.reshape(frames, rows), 1000),
        "sliding_ncc": (query, ref),
        "single_bin_dft": (rng.normal(size=(55, frames)), 10.0 / 30.0),
    }


def _time(fn, args, repeat: int, number: int) -> tuple[float, float]:
    runs = timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)
    per_call = [1e3 * t / number for t in runs]
    return statistics.median(per_call), min(per_call)


def run(quick: bool = False, seed: int = 0) -> list[Timing]:
    backends = available_backends()
    cases = _cases(np.random.default_rng(seed), quick)
    repeat, number = (3, 2) if quick else (7, 3)
    out = []
    for kernel, args in cases.items():
        results = {}
        for name, mod in backends.items():
            fn = getattr(mod, kernel)
            results[name] = fn(*args)
            med, best = _time(fn, args, repeat, number)
            out.append(Timing(kernel, name, med, best))
        if "cython" in results:
            a, b = results["python"], results["cython"]
            if not np.allclose(a, b, rtol=1e-9, atol=1e-9, equal_nan=True):
                raise AssertionError(f"{kernel}: backends disagree")
    return out


def _table(timings: list[Timing]) -> str:
    by_kernel: dict[str, dict[str, Timing]] = {}
    for t in timings:
        by_kernel.setdefault(t.kernel, {})[t.backend] = t
    lines = [f"{'kernel':<20}{'python ms':>12}{'cython ms':>12}{'speed-up':>10}"]
    for kernel, row in by_kernel.items():
        py = row["python"].median_ms
        cy = row["cython"].median_ms if "cython" in row else float("nan")
        lines.append(f"{kernel:<20}{py:>12.2f}{cy:>12.2f}{py / cy:>9.1f}x")
    return "\n".join(lines)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write raw timings here")
    args = p.parse_args(argv)

    if "cython" not in available_backends():
        print("compiled kernels not built; timing the numpy fallback only", file=sys.stderr)
    timings = run(args.quick, args.seed)
    print(_table(timings))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump([asdict(t) for t in timings], fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
