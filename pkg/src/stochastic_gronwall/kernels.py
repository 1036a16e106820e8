"""Hot numeric kernels: implicit Euler-Maruyama batch stepping and
streaming moment accumulation.

The kernels are written as plain Python loops over numpy arrays and are
JIT-compiled with numba when it is importable. Setting the environment
variable ``SGRONWALL_NO_NUMBA=1`` before import forces the uncompiled
numpy fallback; both backends execute the same source, so per-path
arithmetic is identical bit for bit. ``ACTIVE_BACKEND`` records the
selection, and ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("SGRONWALL_NO_NUMBA", "") != "1"
ACTIVE_BACKEND = "numba" if USE_NUMBA else "numpy"

# Drift/diffusion codes for problems the batch kernel knows how to step.
KERNEL_LINEAR = 0
KERNEL_GINZBURG_LANDAU = 1


def _jit(fn):
    return njit(cache=True)(fn) if USE_NUMBA else fn


def _drift_impl(kernel_id, params, x):
    if kernel_id == 0:
        return -params[0] * x
    return x - x * x * x


def _drift_slope_impl(kernel_id, params, x):
    if kernel_id == 0:
        return -params[0]
    return 1.0 - 3.0 * x * x


def _diffusion_impl(kernel_id, params, x):
    if kernel_id == 0:
        return params[1] * x
    return params[0] * x


_drift = _jit(_drift_impl)
_drift_slope = _jit(_drift_slope_impl)
_diffusion = _jit(_diffusion_impl)


def _implicit_step_impl(kernel_id, params, h, b, tol, max_iter):
    """Solve z - h*f(z) = b for one implicit drift step.

    Newton from the explicit predictor, with safeguarded bisection on a
    geometrically grown bracket as fallback. The residual is strictly
    increasing in z for one-sided Lipschitz drifts with h below the
    Lipschitz threshold, so the bracket always contains a unique root.
    Returns (root, iterations, converged).
    """
    z = b
    iters = 0
    for _ in range(max_iter):
        r = z - h * _drift(kernel_id, params, z) - b
        if abs(r) <= tol:
            return z, iters, True
        denom = 1.0 - h * _drift_slope(kernel_id, params, z)
        if denom <= 1e-14 or not np.isfinite(denom):
            break
        z = z - r / denom
        iters += 1
        if not np.isfinite(z):
            break

    # Bisection fallback on [-span, span], grown until it brackets.
    span = 1.0 + 2.0 * abs(b)
    lo = -span
    hi = span
    grew = 0
    while lo - h * _drift(kernel_id, params, lo) - b > 0.0 and grew < 600:
        lo *= 2.0
        grew += 1
    while hi - h * _drift(kernel_id, params, hi) - b < 0.0 and grew < 600:
        hi *= 2.0
        grew += 1
    if grew >= 600:
        return z, iters, False
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        r = mid - h * _drift(kernel_id, params, mid) - b
        iters += 1
        if abs(r) <= tol:
            return mid, iters, True
        if r < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-300 + 4e-16 * (abs(lo) + abs(hi)):
            break
    mid = 0.5 * (lo + hi)
    r = mid - h * _drift(kernel_id, params, mid) - b
    return mid, iters, abs(r) <= 10.0 * tol


_implicit_step = _jit(_implicit_step_impl)


def _bem_scalar_batch_impl(kernel_id, params, x0, h, d_w, tol, max_iter):
    """Step a batch of scalar implicit Euler-Maruyama paths.

    d_w holds the Brownian increments, one row per path, already scaled
    to variance h. Returns the full state arrays (paths x steps+1), the
    per-path solver iteration totals, and a per-path failure flag; the
    states of a failed path are NaN from the failed step onward.
    """
    n_paths, n_steps = d_w.shape
    states = np.empty((n_paths, n_steps + 1))
    iters = np.zeros(n_paths, dtype=np.int64)
    failed = np.zeros(n_paths, dtype=np.bool_)
    for ip in range(n_paths):
        y = x0
        states[ip, 0] = y
        for j in range(n_steps):
            b = y + _diffusion(kernel_id, params, y) * d_w[ip, j]
            z, used, ok = _implicit_step(kernel_id, params, h, b, tol, max_iter)
            iters[ip] += used
            if not ok:
                failed[ip] = True
                for jj in range(j + 1, n_steps + 1):
                    states[ip, jj] = np.nan
                break
            y = z
            states[ip, j + 1] = y
    return states, iters, failed


bem_scalar_batch = _jit(_bem_scalar_batch_impl)


def _welford_chunk_impl(values):
    """Single-pass streaming mean and M2 of a chunk.

    Returns (count, mean, M2) where M2 is the sum of squared deviations;
    the accumulation order is the array order, so the result does not
    depend on how chunks are distributed over workers.
    """
    n = 0
    mean = 0.0
    m2 = 0.0
    for i in range(values.shape[0]):
        x = values[i]
        n += 1
        delta = x - mean
        mean += delta / n
        m2 += delta * (x - mean)
    return n, mean, m2


welford_chunk = _jit(_welford_chunk_impl)


def warm_up() -> None:
    """Trigger JIT compilation of all kernels (no-op on the numpy backend)."""
    d_w = np.zeros((1, 1))
    params = np.array([1.0, 0.0])
    bem_scalar_batch(KERNEL_LINEAR, params, 1.0, 0.1, d_w, 1e-12, 50)
    bem_scalar_batch(KERNEL_GINZBURG_LANDAU, np.array([0.5]), 1.0, 0.1, d_w, 1e-12, 50)
    welford_chunk(np.zeros(2))
