"""Time the compiled per-tick kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--nodes 50] [--ticks 20000]

Also times one simulated hour of the default scenario with each backend
(the fallback run happens in a subprocess with CIDOR_SIM_PURE=1).
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from cidor_sim import _kernels_py, kernels


def bench(mod, n, ticks, seed=0):
    rng = np.random.default_rng(seed)
    seg = np.zeros((n, 6))
    seg[:, 1:3] = rng.uniform(0, 1500, (n, 2))
    seg[:, 3:5] = rng.uniform(-1.5, 1.5, (n, 2))
    seg[:, 5] = np.inf
    xy = np.zeros((n, 2))
    state = np.zeros((n, n), dtype=np.uint8)
    changes = 0
    t0 = time.perf_counter()
    for k in range(ticks):
        mod.positions(float(k % 500), seg, xy)
        changes += len(mod.contact_changes(xy, 100.0, state))
    return time.perf_counter() - t0, changes


SIM = (
    "import time;from cidor_sim import ScenarioConfig, run, kernels;"
    "t=time.perf_counter();run(ScenarioConfig({{'duration_s':'{d}'}}),1);"
    "print(kernels.COMPILED, time.perf_counter()-t)"
)


def sim_time(pure, duration):
    env = dict(os.environ)
    env.pop("CIDOR_SIM_PURE", None)
    if pure:
        env["CIDOR_SIM_PURE"] = "1"
    out = subprocess.run([sys.executable, "-c", SIM.format(d=duration)], env=env,
                         capture_output=True, text=True, check=True).stdout.split()
    return out[0] == "True", float(out[1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=50)
    ap.add_argument("--ticks", type=int, default=20000)
    ap.add_argument("--sim-seconds", type=float, default=3600)
    args = ap.parse_args()

    py_t, py_c = bench(_kernels_py, args.nodes, args.ticks)
    print(f"numpy fallback : {py_t:8.3f} s  ({args.ticks} ticks, {args.nodes} nodes, {py_c} changes)")
    if kernels.COMPILED:
        from cidor_sim import _kernels

        cy_t, cy_c = bench(_kernels, args.nodes, args.ticks)
        assert cy_c == py_c, "backends disagree"
        print(f"compiled       : {cy_t:8.3f} s  speedup x{py_t / cy_t:.1f}")
    else:
        print("compiled       : not built")

    for pure in (False, True):
        compiled, secs = sim_time(pure, args.sim_seconds)
        label = "compiled" if compiled else "fallback"
        print(f"sim {args.sim_seconds:g} s, {label:8s}: {secs:.2f} s wall")


if __name__ == "__main__":
    main()
