#!/usr/bin/env python3
"""Benchmark the compiled robustness kernel against the pure-Python twin.

The exhaustive digraph sweep is the hot path of the acceptance suite
(~78.6M peel/brute pairs at N=5), so this is where the extension earns its
keep. Run after `pip install -e . --no-build-isolation`:

    python3 benchmarks/bench_backends.py
"""

import time

import numpy as np

from resilient_observer._kernels import robust_py

try:
    from resilient_observer._kernels import robust_cy
except ImportError:
    robust_cy = None


def _random_masks(rng, n, p):
    masks = [0] * n
    for j in range(n):
        for i in range(n):
            if i != j and rng.random() < p:
                masks[i] |= 1 << j
    return masks


def bench_exhaustive(impl, n):
    t0 = time.perf_counter()
    checks, bad = impl.exhaustive_agreement(n)
    dt = time.perf_counter() - t0
    assert bad == 0
    return checks, dt


def bench_per_call(impl, cases):
    t0 = time.perf_counter()
    acc = 0
    for masks, s, r in cases:
        acc += impl.peel_robust(masks, s, r)
        acc += impl.brute_robust(masks, s, r)
    return acc, time.perf_counter() - t0


def main():
    rows = []

    for n in (3, 4):
        checks, t_py = bench_exhaustive(robust_py, n)
        row = [f"exhaustive sweep N={n} ({checks} checks)", f"{t_py:.3f}s"]
        if robust_cy is not None:
            _, t_cy = bench_exhaustive(robust_cy, n)
            row += [f"{t_cy:.3f}s", f"{t_py / t_cy:.0f}x"]
        rows.append(row)

    if robust_cy is not None:
        checks, t_cy = bench_exhaustive(robust_cy, 5)
        rows.append([f"exhaustive sweep N=5 ({checks} checks)", "(skipped)", f"{t_cy:.3f}s", "-"])

    rng = np.random.default_rng(0)
    cases = []
    for _ in range(2000):
        n = 7
        masks = _random_masks(rng, n, 0.5)
        s = int(rng.integers(1, 1 << n))
        r = int(rng.integers(1, 4))
        cases.append((masks, s, r))
    acc_py, t_py = bench_per_call(robust_py, cases)
    row = ["per-call peel+brute (2000 random N=7)", f"{t_py:.3f}s"]
    if robust_cy is not None:
        acc_cy, t_cy = bench_per_call(robust_cy, cases)
        assert acc_py == acc_cy, "backends disagree"
        row += [f"{t_cy:.3f}s", f"{t_py / t_cy:.0f}x"]
    rows.append(row)

    header = ["workload", "python", "cython", "speedup"]
    widths = [max(len(header[i]), *(len(r[i]) for r in rows if i < len(r))) for i in range(4)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    if robust_cy is None:
        print("\ncompiled kernel not built; showing pure-Python timings only")


if __name__ == "__main__":
    main()
