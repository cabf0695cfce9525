"""Benchmark the jit-compiled kernels against the pure-Python fallback.

Runs the same workloads twice in subprocesses, once as-is and once with
KSOL_DISABLE_JIT=1, and prints a comparison table. The heavy paths are the
adaptive integrator (dominates classification runs) and the Picard sweeps.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOADS = {
    "picard_solve (4,1,rho=0)": """
import time
from ksol import phase, picard
p = phase.make_params(4, 1, 0.0, 1.0)
picard.picard_solve(1.0, p)  # warm cache / compile
t0 = time.perf_counter()
for _ in range(REPEAT):
    picard.picard_solve(1.0, p)
print((time.perf_counter() - t0) / REPEAT)
""",
    "type-B orbit (4,1,rho=1)": """
import time
from ksol import orbit, phase, picard
p = phase.make_params(4, 1, 1.0, 1.0)
sol = picard.picard_solve(1.0, p)
orbit.integrate(sol, p)  # warm compile
t0 = time.perf_counter()
for _ in range(REPEAT):
    orbit.integrate(sol, p)
print((time.perf_counter() - t0) / REPEAT)
""",
    "expander orbit (4,1,rho=-1)": """
import time
from ksol import orbit, phase, picard
p = phase.make_params(4, 1, -1.0, 1.0)
sol = picard.picard_solve(1.0, p)
orbit.integrate(sol, p)  # warm compile
t0 = time.perf_counter()
for _ in range(REPEAT):
    orbit.integrate(sol, p)
print((time.perf_counter() - t0) / REPEAT)
""",
}


def timed(code, repeat, disable_jit):
    env = dict(os.environ)
    env["KSOL_DISABLE_JIT"] = "1" if disable_jit else "0"
    script = f"REPEAT = {repeat}\n" + code
    out = subprocess.run(
        [sys.executable, "-c", script], capture_output=True, text=True, env=env
    )
    if out.returncode != 0:
        raise RuntimeError(out.stderr)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rows = []
    for name, code in WORKLOADS.items():
        t_jit = timed(code, args.repeat, disable_jit=False)
        t_py = timed(code, args.repeat, disable_jit=True)
        rows.append((name, t_jit, t_py, t_py / t_jit))
    width = max(len(r[0]) for r in rows)
    print(f"{'workload':<{width}}  {'jit [s]':>10}  {'python [s]':>10}  {'speedup':>8}")
    for name, t_jit, t_py, ratio in rows:
        print(f"{name:<{width}}  {t_jit:>10.4f}  {t_py:>10.4f}  {ratio:>7.1f}x")
    print(json.dumps({name: {"jit_s": tj, "python_s": tp} for name, tj, tp, _ in rows}))


if __name__ == "__main__":
    main()
