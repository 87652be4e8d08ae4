#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure NumPy fallback.

Each kernel runs in two subprocesses (MODALSHIFT_NUMBA=1 / 0) on identical
inputs; the script reports wall times, the speedup, and verifies that both
backends return bit-identical results.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from modalshift import _kernels as K

quick = sys.argv[1] == "quick"
rng = np.random.default_rng(99)
out = {"backend": K.BACKEND}

# GA search: one agent's NSGA-II run at demo-city scale
Z, M = 144, 5
obj = np.ascontiguousarray(rng.normal(size=(Z, M)))
feas = (rng.random(Z) < 0.7).astype(np.uint8)
viol = rng.random(Z) * (1 - feas)
cx = rng.random(Z) * 12.0
cy = rng.random(Z) * 12.0
K.ga_select_zones(obj, feas, viol, cx, cy, 50, 100, 0.2, 0.9, 7, 10)  # warmup/JIT
reps = 2 if quick else (50 if K.BACKEND == "numba" else 3)
t0 = time.perf_counter()
res = []
for s in range(reps):
    zones, n, _ = K.ga_select_zones(obj, feas, viol, cx, cy, 50, 100, 0.2, 0.9, 1000 + s, 10)
    res.append(zones[:n].tolist())
out["ga_ms_per_call"] = (time.perf_counter() - t0) / reps * 1000
out["ga_result"] = res[0]

# nondominated sort at acceptance scale
N, M2 = 300, 5
obj2 = np.ascontiguousarray(rng.normal(size=(N, M2)))
feas2 = (rng.random(N) < 0.8).astype(np.uint8)
viol2 = rng.random(N) * (1 - feas2)
K.sort_and_crowd(obj2, feas2, viol2)
reps = 2 if quick else (100 if K.BACKEND == "numba" else 5)
t0 = time.perf_counter()
for _ in range(reps):
    ranks, crowd = K.sort_and_crowd(obj2, feas2, viol2)
out["sort_ms_per_call"] = (time.perf_counter() - t0) / reps * 1000
out["sort_result"] = ranks.tolist()

# raster coverage of a station buffer on the 50 m grid
px = np.array([0.0, 4.0, 4.0, 0.0]); py = np.array([0.0, 0.0, 4.0, 4.0])
gx = np.array([1.0, 3.0]); gy = np.array([2.0, 2.0])
K.band_area(px, py, gx, gy, 0.0, 1.9, 0.05)
reps = 2 if quick else (200 if K.BACKEND == "numba" else 10)
t0 = time.perf_counter()
for _ in range(reps):
    area = K.band_area(px, py, gx, gy, 0.0, 1.9, 0.05)
out["band_ms_per_call"] = (time.perf_counter() - t0) / reps * 1000
out["band_result"] = repr(area)

print(json.dumps(out))
"""


def run_backend(flag: str, quick: bool) -> dict:
    env = dict(os.environ, MODALSHIFT_NUMBA=flag)
    proc = subprocess.run(
        [sys.executable, "-c", _WORKER, "quick" if quick else "full"],
        env=env,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(1)
    return json.loads(proc.stdout)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="fewer repetitions")
    args = parser.parse_args()
    print("benchmarking numba backend ...")
    jit = run_backend("1", args.quick)
    print("benchmarking numpy fallback (MODALSHIFT_NUMBA=0) ...")
    plain = run_backend("0", args.quick)
    assert jit["backend"] == "numba", "numba not available; install it to compare backends"
    assert plain["backend"] == "numpy"
    for key in ("ga_result", "sort_result", "band_result"):
        if jit[key] != plain[key]:
            print(f"MISMATCH in {key}: backends disagree!")
            return 1
    print(f"\n{'kernel':<22}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for label, key in (
        ("nsga2 search (1 agent)", "ga_ms_per_call"),
        ("nondominated sort", "sort_ms_per_call"),
        ("raster coverage", "band_ms_per_call"),
    ):
        a, b = jit[key], plain[key]
        print(f"{label:<22}{a:>12.3f}{b:>12.3f}{b / a:>9.1f}x")
    print("\nresults bit-identical across backends: OK")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
