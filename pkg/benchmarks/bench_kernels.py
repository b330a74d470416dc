"""Compare the numba and numpy kernel backends on the hot paths.

Runs itself twice as a subprocess with PSINEHARI_BACKEND forced to each
value, times the fractional weight-matrix assembly and the power reductions,
and prints a side-by-side table.  The backend is fixed at import time, which
is why the measurement needs separate processes.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

CASES = [
    ("rl_matrix n=257", "matrix", 257),
    ("rl_matrix n=1025", "matrix", 1025),
    ("rl_matrix n=4097", "matrix", 4097),
    ("power_sum 257^2", "psum", 257),
    ("signed_power 257^2", "spow", 257),
    ("hilfer assembly n=1025", "hilfer", 1025),
]


def _run_case(kind: str, n: int, repeat: int) -> float:
    import numpy as np

    from psinehari._kernels import rl_weight_matrix, signed_power, weighted_power_sum
    from psinehari.domain import GridSpec, identity_psi
    from psinehari.fracops import assemble_hilfer_derivative

    v = np.linspace(0.0, 1.0, n)
    field = np.random.default_rng(0).standard_normal((n, n))
    w = np.full(n * n, 1.0 / (n * n))
    grid = GridSpec(1.0, n, 1)

    def once():
        if kind == "matrix":
            rl_weight_matrix(v, 0.4, "left")
        elif kind == "psum":
            weighted_power_sum(w, field, 1.5)
        elif kind == "spow":
            signed_power(field, 0.5)
        elif kind == "hilfer":
            assemble_hilfer_derivative("left", 0.8, 0.5, identity_psi(), grid)
        else:
            raise ValueError(kind)

    once()  # warmup; also absorbs jit compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        once()
        best = min(best, time.perf_counter() - t0)
    return best


def worker(repeat: int) -> None:
    from psinehari._kernels import backend_name

    out = {"backend": backend_name()}
    for label, kind, n in CASES:
        out[label] = _run_case(kind, n, repeat)
    print(json.dumps(out))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if args.worker:
        worker(args.repeat)
        return

    results = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, PSINEHARI_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker", "--repeat", str(args.repeat)],
            env=env,
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            print(f"{backend} worker failed:\n{proc.stderr}", file=sys.stderr)
            continue
        data = json.loads(proc.stdout.strip().splitlines()[-1])
        if data.pop("backend") != backend:
            print(f"warning: {backend} run fell back to a different backend", file=sys.stderr)
        results[backend] = data

    if set(results) != {"numpy", "numba"}:
        sys.exit(1)
    width = max(len(label) for label, _, _ in CASES)
    print(f"{'case':<{width}}  {'numpy':>12}  {'numba':>12}  {'speedup':>8}")
    for label, _, _ in CASES:
        a = results["numpy"][label]
        b = results["numba"][label]
        print(f"{label:<{width}}  {a * 1e3:>10.3f}ms  {b * 1e3:>10.3f}ms  {a / b:>7.1f}x")


if __name__ == "__main__":
    main()
