"""Compare the numba kernels with the pure-numpy fallback.

    python3 benchmarks/bench_kernel.py [--steps 2000] [--repeat 3]

Each backend runs in its own interpreter (CONEWALK_NO_NUMBA is read at
import time).  Reported: seconds per run and the largest difference of the
recorded per-step target probabilities between the two backends.
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from conewalk import catalog, kernel
from conewalk._accel import backend
steps, repeat = int(sys.argv[1]), int(sys.argv[2])
out = {"backend": backend(), "cases": {}}
for name, model in catalog.corpus().items():
    x = (1,) * model.d
    target = [(3,) * model.d]
    kernel.run(model, x, 5, target)  # warm-up (jit compile)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        rec = kernel.run(model, x, steps, target, window=kernel.WindowPolicy.trimmed())
        best = min(best, time.perf_counter() - t0)
    out["cases"][name] = {"seconds": best, "series": rec.series[:, 0].tolist(), "survival": float(rec.totals[-1])}
print(json.dumps(out))
"""


def run_backend(no_numba: bool, steps: int, repeat: int) -> dict:
    env = dict(os.environ)
    if no_numba:
        env["CONEWALK_NO_NUMBA"] = "1"
    else:
        env.pop("CONEWALK_NO_NUMBA", None)
    res = subprocess.run(
        [sys.executable, "-c", CHILD, str(steps), str(repeat)], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run_backend(False, args.steps, args.repeat)
    slow = run_backend(True, args.steps, args.repeat)
    print(f"{'model':<16}{fast['backend']:>10}{slow['backend']:>10}{'speedup':>9}{'max |diff|':>12}")
    for name, a in fast["cases"].items():
        b = slow["cases"][name]
        diff = max(abs(u - v) for u, v in zip(a["series"], b["series"]))
        print(f"{name:<16}{a['seconds']:>10.3f}{b['seconds']:>10.3f}{b['seconds'] / a['seconds']:>9.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
