#!/usr/bin/env python3
"""Benchmark the JIT-compiled kernels against the uncompiled fallback.

Both backends execute the same source (see stochastic_gronwall.kernels);
the fallback is what you get with SGRONWALL_NO_NUMBA=1 or without numba
installed. Workload sizes differ per backend so the slow path finishes
quickly; timings are normalized per path-step / per sample.

Usage: python benchmarks/bench_kernels.py [--paths 20000] [--steps 64]
"""

import argparse
import math
import time

import numpy as np

from stochastic_gronwall import kernels
from stochastic_gronwall.kernels import (
    KERNEL_GINZBURG_LANDAU,
    _bem_scalar_batch_impl,
    _welford_chunk_impl,
    bem_scalar_batch,
    welford_chunk,
)
from stochastic_gronwall.streams import StreamPlan


def time_call(fn, *args, repeats=3):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_bem(n_paths, n_steps):
    params = np.array([0.5])
    h = 1.0 / 64.0
    plan = StreamPlan(0)

    rows = []
    d_w = plan.chunk_stream(0).standard_normal((n_paths, n_steps)) * math.sqrt(h)
    bem_scalar_batch(KERNEL_GINZBURG_LANDAU, params, 1.0, h, d_w[:2], 1e-12, 50)  # JIT warmup
    active = time_call(bem_scalar_batch, KERNEL_GINZBURG_LANDAU, params, 1.0, h, d_w, 1e-12, 50)
    rows.append((kernels.ACTIVE_BACKEND, n_paths, active, active / (n_paths * n_steps) * 1e6))

    if kernels.ACTIVE_BACKEND == "numba":
        small = max(64, n_paths // 100)
        fallback = time_call(
            _bem_scalar_batch_impl, KERNEL_GINZBURG_LANDAU, params, 1.0, h,
            d_w[:small], 1e-12, 50, repeats=1,
        )
        rows.append(("python fallback", small, fallback, fallback / (small * n_steps) * 1e6))
    return rows


def bench_welford(n_samples):
    plan = StreamPlan(1)
    vals = plan.chunk_stream(0).standard_normal(n_samples)
    welford_chunk(vals[:16])  # JIT warmup
    active = time_call(welford_chunk, vals)
    rows = [(kernels.ACTIVE_BACKEND, n_samples, active, active / n_samples * 1e9)]
    if kernels.ACTIVE_BACKEND == "numba":
        small = n_samples // 10
        fallback = time_call(_welford_chunk_impl, vals[:small], repeats=1)
        rows.append(("python fallback", small, fallback, fallback / small * 1e9))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=20_000)
    parser.add_argument("--steps", type=int, default=64)
    parser.add_argument("--samples", type=int, default=2_000_000)
    args = parser.parse_args()

    print(f"active backend: {kernels.ACTIVE_BACKEND}")
    print()
    print("implicit Euler-Maruyama batch stepping (Ginzburg-Landau)")
    print(f"{'backend':<18} {'paths':>8} {'seconds':>10} {'us/path-step':>14}")
    bem_rows = bench_bem(args.paths, args.steps)
    for name, size, secs, unit in bem_rows:
        print(f"{name:<18} {size:>8} {secs:>10.4f} {unit:>14.4f}")
    if len(bem_rows) == 2:
        print(f"speedup: {bem_rows[1][3] / bem_rows[0][3]:.1f}x")

    print()
    print("streaming moment accumulation (Welford)")
    print(f"{'backend':<18} {'samples':>8} {'seconds':>10} {'ns/sample':>14}")
    wf_rows = bench_welford(args.samples)
    for name, size, secs, unit in wf_rows:
        print(f"{name:<18} {size:>8} {secs:>10.4f} {unit:>14.4f}")
    if len(wf_rows) == 2:
        print(f"speedup: {wf_rows[1][3] / wf_rows[0][3]:.1f}x")


if __name__ == "__main__":
    main()
