"""Compare the compiled and pure-Python kernels on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]
"""
from __future__ import annotations

import argparse
import json
import random
import time

import numpy as np

from fogsvd import crypto, kernels


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def jacobi_case(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 16, size=(n, 2 * n)).astype(np.float64)
    G = X @ X.T

    def run():
        a, v = G.copy(), np.eye(n)
        assert kernels.jacobi_sweeps(a, v, 1e-12, 100) >= 0
    return run


def scan_case(bits: int, seed: int = 0):
    rng = random.Random(seed)
    S = crypto.random_prime(bits, rng)
    W = rng.randrange(1 << (bits - 6), 1 << (bits - 5))
    lc = [rng.randint(1, S // W - 1) * W + rng.randint(1, 32) * S for _ in range(12)]
    return lambda: kernels.scan_moduli(lc, 3, S + 1)


def diff_case(seed: int = 0):
    rng = random.Random(seed)
    S, W, t = crypto.random_prime(40, rng), rng.randrange(1 << 20, 1 << 21), 512
    lc = [rng.sample(range(1, t + 1), 1)[0] * W + rng.randint(1, t) * S for _ in range(32)]
    return lambda: kernels.scan_differences(lc, t)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    cases = {
        "jacobi_16": jacobi_case(16),
        "jacobi_48": jacobi_case(48),
        "scan_moduli_16bit": scan_case(16),
        "scan_moduli_20bit": scan_case(20),
        "scan_differences_32": diff_case(),
    }
    report = {}
    for name, fn in cases.items():
        row = {}
        for backend in kernels.BACKENDS:
            kernels.set_backend(backend)
            row[backend] = _best(fn, args.repeat)
        if "cython" in row:
            row["speedup"] = row["python"] / row["cython"]
        report[name] = row
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
