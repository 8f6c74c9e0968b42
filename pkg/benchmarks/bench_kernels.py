#!/usr/bin/env python3
"""Benchmark the compiled envelope-pipeline kernel against the numpy fallback.

Two regimes matter:

* small blocks (drive-level bisection inside sweeps and calibration): the
  per-call overhead dominates, which is where the compiled single-pass loop
  earns its keep;
* large blocks (two-tone IMD analysis): numpy's vectorized transcendentals
  are competitive, so the gap narrows or inverts.

Also times the end-to-end calibration once per backend.

Run: python benchmarks/bench_kernels.py
"""
import os
import subprocess
import sys
import time

import numpy as np

from hfpa.kernels import available_backends

_CALIBRATE_SNIPPET = """
import time
from hfpa.calibrate import REFERENCE_ANCHORS, default_init, fit
t0 = time.perf_counter()
init = default_init(REFERENCE_ANCHORS)
fit(REFERENCE_ANCHORS, init, budget=600)
print(f"{time.perf_counter() - t0:.3f}")
"""


def time_kernel(fn, env, reps):
    aout = np.empty_like(env)
    args = (env, 40.0, 54.0, 8.0, 0.4, 2.0, 3.8, 8.2, 20.6, aout)
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - t0) / reps


def time_calibration(backend: str) -> float:
    env = dict(os.environ, HFPA_KERNEL=backend)
    out = subprocess.run([sys.executable, "-c", _CALIBRATE_SNIPPET],
                         env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    backends = available_backends()
    print(f"available backends: {', '.join(backends)}\n")

    rng = np.random.default_rng(1)
    sizes = [(64, 20_000), (1024, 2_000), (16_384, 200), (131_072, 30)]
    header = f"{'block':>8} | " + " | ".join(f"{n:>12}" for n in backends)
    print(header)
    print("-" * len(header))
    rows = {}
    for n, reps in sizes:
        env = np.abs(rng.normal(0.0, 20.0, n))
        cells = []
        for name, fn in backends.items():
            per_call = time_kernel(fn, env, reps)
            rows[(n, name)] = per_call
            unit = "us" if per_call < 1e-3 else "ms"
            value = per_call * (1e6 if unit == "us" else 1e3)
            cells.append(f"{value:9.1f} {unit}")
        print(f"{n:>8} | " + " | ".join(f"{c:>12}" for c in cells))

    if "cython" in backends:
        print("\nspeedup (python / cython):")
        for n, _ in sizes:
            ratio = rows[(n, "python")] / rows[(n, "cython")]
            print(f"  {n:>8} samples: {ratio:5.2f}x")

    print("\nend-to-end calibration (default init + 600-eval fit):")
    for name in backends:
        print(f"  {name:>8}: {time_calibration(name):.2f} s")


if __name__ == "__main__":
    main()
