"""Benchmark the compiled table kernels against the numpy fallback.

Two workloads:
* raw kernels: aligned products and marginalizations over random small
  tables (the shape mix message passing actually produces),
* end to end: full downward/upward chain passes on random networks, once
  per backend.

Run:  python3 benchmarks/bench_kernels.py [--quick]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bordertree.kernels import available_backends


def _random_case(rng):
    n_vars = int(rng.integers(3, 7))
    cards = [int(rng.integers(2, 5)) for _ in range(n_vars)]
    a_axes = tuple(sorted(rng.choice(n_vars, size=int(rng.integers(1, n_vars + 1)), replace=False)))
    b_axes = tuple(sorted(rng.choice(n_vars, size=int(rng.integers(1, n_vars + 1)), replace=False)))
    union = tuple(sorted(set(a_axes) | set(b_axes)))
    remap = {ax: i for i, ax in enumerate(union)}
    a = rng.uniform(0.1, 1.0, size=tuple(cards[ax] for ax in a_axes))
    b = rng.uniform(0.1, 1.0, size=tuple(cards[ax] for ax in b_axes))
    out_shape = tuple(cards[ax] for ax in union)
    return (
        a,
        tuple(remap[ax] for ax in a_axes),
        b,
        tuple(remap[ax] for ax in b_axes),
        out_shape,
    )


def bench_kernels(repeats: int, cases: int):
    rng = np.random.default_rng(12345)
    workload = [_random_case(rng) for _ in range(cases)]
    sum_axes_args = []
    for a, a_axes, _b, _b_axes, _shape in workload:
        k = max(1, a.ndim // 2)
        sum_axes_args.append((a, tuple(range(k))))

    results = {}
    reference = None
    for mod in available_backends():
        t0 = time.perf_counter()
        for _ in range(repeats):
            out = [mod.product(*case) for case in workload]
            for v, axes in sum_axes_args:
                mod.sum_axes(v, axes)
        elapsed = time.perf_counter() - t0
        per_op = elapsed / (repeats * (len(workload) + len(sum_axes_args)))
        results[mod.BACKEND] = per_op
        if reference is None:
            reference = out
        else:
            for x, y in zip(reference, out):
                assert np.allclose(x, y, atol=1e-12), "backends disagree"
    return results


def bench_passes(nets: int):
    from bordertree.border_chain import build_chain, run_passes
    from bordertree.randgen import random_dag, random_evidence
    import bordertree.kernels as kernels

    rng = np.random.default_rng(999)
    cases = []
    for _ in range(nets):
        bn = random_dag(rng, 8, 12, 3)
        cases.append((build_chain(bn), random_evidence(rng, bn)))

    saved = (kernels.product, kernels.sum_axes)
    results = {}
    try:
        for mod in available_backends():
            kernels.product, kernels.sum_axes = mod.product, mod.sum_axes
            t0 = time.perf_counter()
            for chain, ev in cases:
                run_passes(chain, ev)
            results[mod.BACKEND] = (time.perf_counter() - t0) / nets
    finally:
        kernels.product, kernels.sum_axes = saved
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    repeats = 20 if args.quick else 200
    cases = 100 if args.quick else 400
    nets = 10 if args.quick else 60

    print("raw kernels (aligned product + marginalize):")
    raw = bench_kernels(repeats, cases)
    base = raw.get("numpy")
    for backend, per_op in sorted(raw.items()):
        print(f"  {backend:<8} {per_op * 1e6:8.2f} us/op   x{base / per_op:.2f} vs numpy")

    print("chain passes on random networks:")
    passes = bench_passes(nets)
    base = passes.get("numpy")
    for backend, per_net in sorted(passes.items()):
        print(f"  {backend:<8} {per_net * 1e3:8.2f} ms/net  x{base / per_net:.2f} vs numpy")


if __name__ == "__main__":
    main()
