"""Compare the numba kernels with the pure-numpy fallback.

Usage: python benchmarks/bench_simulate.py [--t-end 200] [--repeat 3]

The fallback runs in a child process with SATGUARD_DISABLE_JIT=1 because the
flag is read once at import.
"""

import argparse
import json
import os
import subprocess
import sys
import time

CHILD = """
import json, sys, time
from satguard import NUMBA_ENABLED
from satguard.config import load_config
from satguard.controller import ControllerGains
from satguard.simulate import SimConfig, simulate
from satguard.tuning import envelope_constants

t_end, repeat = float(sys.argv[1]), int(sys.argv[2])
sc = load_config("golden")
p = sc.plant_truth()
g = ControllerGains(17.0, 0.0102, 1.0, -1.0, 3.0)
cfg = SimConfig(t_end, 0.005, 20)

t0 = time.perf_counter()
simulate(p, g, SimConfig(1.0, 0.005, 20))
envelope_constants(sc.internal, 0.1)
warmup = time.perf_counter() - t0

sim, quad = [], []
for _ in range(repeat):
    t0 = time.perf_counter()
    tr = simulate(p, g, cfg)
    sim.append(time.perf_counter() - t0)
    t0 = time.perf_counter()
    envelope_constants(sc.internal, 0.1)
    quad.append(time.perf_counter() - t0)
print(json.dumps({"numba": NUMBA_ENABLED, "warmup": warmup, "simulate": min(sim), "constants": min(quad),
                  "final_y": float(tr["y"][-1])}))
"""


def run(disable_jit, t_end, repeat):
    env = dict(os.environ)
    if disable_jit:
        env["SATGUARD_DISABLE_JIT"] = "1"
    else:
        env.pop("SATGUARD_DISABLE_JIT", None)
    out = subprocess.run([sys.executable, "-c", CHILD, str(t_end), str(repeat)], env=env, check=True,
                         capture_output=True, text=True).stdout
    return json.loads(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=200.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    fast = run(False, args.t_end, args.repeat)
    slow = run(True, args.t_end, args.repeat)
    steps = int(round(args.t_end / 0.005))
    print(f"closed loop, {steps} RK4 steps (t_end={args.t_end:g} s, h=0.005)")
    print(f"{'path':<10}{'warmup s':>10}{'simulate s':>12}{'constants s':>13}{'final y':>14}")
    for name, r in (("numba", fast), ("numpy", slow)):
        print(f"{name:<10}{r['warmup']:>10.3f}{r['simulate']:>12.4f}{r['constants']:>13.4f}{r['final_y']:>14.9g}")
    print(f"speedup simulate x{slow['simulate'] / fast['simulate']:.1f}, "
          f"constants x{slow['constants'] / fast['constants']:.1f}")
    if abs(fast["final_y"] - slow["final_y"]) > 1e-9 * max(1.0, abs(slow["final_y"])):
        print("warning: paths disagree on the final output")
        return 1
    return 0


if __name__ == "__main__":
    t = time.perf_counter()
    code = main()
    print(f"total {time.perf_counter() - t:.1f} s")
    sys.exit(code)
