"""Compiled (numba) vs pure-numpy backend timings.

    python3 benchmarks/bench_backends.py [--n 9] [--repeat 3]

Each backend runs in its own interpreter because the choice is fixed at
import time by ``QAPLON_NO_NUMBA``. The compiled side is warmed up once so
JIT compilation is not counted.
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _workloads(n):
    from qaplon.autocorr import random_walk
    from qaplon.generators import GeneratorParams, generate
    from qaplon.heuristics import GaConfig, SaConfig, genetic_algorithm, simulated_annealing
    from qaplon.lon import extract_lon

    inst = generate(GeneratorParams("uniform", n, 7))
    return {
        f"lon n={n}": lambda: extract_lon(inst),
        "sa x5": lambda: [simulated_annealing(inst, SaConfig(), seed=s) for s in range(5)],
        "ga x2": lambda: [genetic_algorithm(inst, GaConfig(), seed=s) for s in range(2)],
        "walk 1e5": lambda: random_walk(inst, list(range(n)), 100_000, 3),
    }


def child(n, repeat):
    from qaplon._accel import backend_name

    times = {}
    for name, run in _workloads(n).items():
        if backend_name() == "numba":
            run()
        best = float("inf")
        for _ in range(repeat):
            start = time.perf_counter()
            run()
            best = min(best, time.perf_counter() - start)
        times[name] = best
    print(json.dumps({"backend": backend_name(), "times": times}))


def measure(no_numba, n, repeat):
    env = dict(os.environ)
    env.pop("QAPLON_NO_NUMBA", None)
    if no_numba:
        env["QAPLON_NO_NUMBA"] = "1"
    out = subprocess.run([sys.executable, __file__, "--child", "--n", str(n), "--repeat", str(repeat)],
                         env=env, check=True, capture_output=True, text=True).stdout
    return json.loads(out.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=9)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(args.n, args.repeat)
        return
    fast = measure(False, args.n, args.repeat)
    slow = measure(True, args.n, args.repeat)
    print(f"{'workload':<12} {fast['backend'] + ' s':>10} {slow['backend'] + ' s':>10} {'speedup':>8}")
    for name, t in fast["times"].items():
        u = slow["times"][name]
        print(f"{name:<12} {t:>10.4f} {u:>10.4f} {u / t:>7.1f}x")


if __name__ == "__main__":
    main()
