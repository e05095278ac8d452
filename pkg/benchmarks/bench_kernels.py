#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the three hot paths (affine forward, affine backward, Adam update)
at training-relevant shapes, plus a full train_step with each backend
forced. Run from the repository root:

    python benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import statistics
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np  # noqa: E402

from sadvae import kernels  # noqa: E402
from sadvae.kernels import reference  # noqa: E402

try:
    from sadvae.kernels import _native as native
except ImportError:
    native = None

SHAPES = [
    ("batch 32, 64 -> 80", 32, 64, 80),
    ("batch 32, 64 -> 320", 32, 64, 320),
    ("batch 256, 256 -> 512", 256, 256, 512),
]


def timeit(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times) * 1e6  # microseconds


def bench_kernels(repeats):
    rows = []
    for label, n, d_in, d_out in SHAPES:
        rng = np.random.default_rng(0)
        x = rng.standard_normal((n, d_in)).astype(np.float32)
        w = rng.standard_normal((d_out, d_in)).astype(np.float32)
        b = rng.standard_normal(d_out).astype(np.float32)
        gy = rng.standard_normal((n, d_out)).astype(np.float32)
        p = rng.standard_normal(d_out * d_in).astype(np.float32)
        g = rng.standard_normal(d_out * d_in).astype(np.float32)
        m = np.zeros_like(p)
        v = np.zeros_like(p)

        cases = {
            "affine_forward": lambda impl: impl.affine_forward(x, w, b),
            "affine_backward": lambda impl: (
                impl.affine_backward_input(w, gy),
                impl.affine_backward_weight(x, gy),
                impl.affine_backward_bias(gy),
            ),
            "adam_step": lambda impl: impl.adam_step(
                p, g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8
            ),
        }
        for op, call in cases.items():
            ref_us = timeit(lambda: call(reference), repeats)
            if native is not None:
                nat_us = timeit(lambda: call(native), repeats)
                speedup = f"{ref_us / nat_us:5.2f}x"
                nat_text = f"{nat_us:9.1f}"
            else:
                nat_text, speedup = "   n/a", "  n/a"
            rows.append((label, op, f"{ref_us:9.1f}", nat_text, speedup))
    return rows


def bench_train_step(repeats):
    import os
    import subprocess

    # run each backend in a fresh interpreter so import-time selection applies
    code = r"""
import sys, time, statistics
sys.path.insert(0, {src!r})
import numpy as np
from sadvae import seeding
from sadvae.data import RunConfig
from sadvae.model import ModelDims, init_model
from sadvae.trainer import Adam, EffectiveCoefficients, train_step

dims = ModelDims(d_x=64, d_y=32, dim_r=32, dim_v=8)
state = init_model(dims, np.random.default_rng(0))
rng = np.random.default_rng(1)
f_x = rng.standard_normal((32, 64)).astype(np.float32)
f_y = rng.standard_normal((32, 32)).astype(np.float32)
coeffs = EffectiveCoefficients(1.0, 0.011, 0.023, 0.011)
adam = Adam(1e-3); adam_d = Adam(1e-3)
rng_n = seeding.stream(0, seeding.NOISE); rng_t = seeding.stream(0, seeding.PERM)
times = []
for step in range(1, {repeats} + 1):
    start = time.perf_counter()
    train_step(state, f_x, f_y, coeffs, rng_n, rng_t, step, 5, adam, adam_d)
    times.append(time.perf_counter() - start)
print(statistics.median(times) * 1e6)
"""
    src = str(Path(__file__).resolve().parents[1] / "src")
    results = {}
    for backend in ("python", "native") if native is not None else ("python",):
        env = dict(os.environ, SADVAE_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, "-c", code.format(src=src, repeats=repeats)],
            capture_output=True, text=True, env=env,
        )
        if out.returncode != 0:
            raise RuntimeError(out.stderr)
        results[backend] = float(out.stdout.strip())
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    print(f"active backend: {kernels.BACKEND}")
    if native is None:
        print("compiled extension not built; showing fallback timings only\n")

    print(f"{'shape':<24} {'op':<17} {'numpy (us)':>10} {'native (us)':>11} {'speedup':>8}")
    for label, op, ref_us, nat_us, speedup in bench_kernels(args.repeats):
        print(f"{label:<24} {op:<17} {ref_us:>10} {nat_us:>11} {speedup:>8}")

    print("\nfull train_step (batch 32, d_x 64, dim_r 32, dim_v 8):")
    results = bench_train_step(max(50, args.repeats // 2))
    for backend, us in results.items():
        print(f"  {backend:<7} {us:9.1f} us/step")
    if "native" in results:
        print(f"  speedup {results['python'] / results['native']:.2f}x")


if __name__ == "__main__":
    main()
