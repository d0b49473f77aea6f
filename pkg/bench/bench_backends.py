"""Compare the compiled kernels against the pure-Python fallback.

Micro section times individual kernels in-process (both modules are
importable side by side); the macro section runs a full scenario in a
subprocess per backend, since the active backend is chosen once at import.

Usage: python3 bench/bench_backends.py [--repeat N]
"""

import argparse
import math
import os
import random
import subprocess
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from v2xsim._kernels import _pure

try:
    from v2xsim._kernels import _speedups
except ImportError:
    _speedups = None

SCENARIO = os.path.join(os.path.dirname(__file__), "..", "scenarios",
                        "corridor.scenario.json")


def timed(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def micro_cases():
    rng = random.Random(1)
    n = 40
    xs = [rng.uniform(-800, 800) for _ in range(n)]
    ys = [rng.uniform(-800, 800) for _ in range(n)]
    active = [1] * n
    emit = [1] * n
    segs = [(-50.0, -10.0, 50.0, 10.0)]
    seqs = list(range(n))

    def exchange(mod):
        q = [mod.bsm_quantize(xs[i], ys[i], 90.0, 10.0, 0.0, 0.0, 0.0, 0.0,
                              17.59, 78.12) for i in range(n)]
        stores = [mod.TrackStore(n) for _ in range(n)]
        state = 42
        for tick in range(50):
            state, _, _, _ = mod.bsm_exchange(
                stores, xs, ys, active, emit, q, seqs, tick * 100, segs,
                600.0, 350.0, 150.0, 0.1, 2, 5.0, state, 0)

    def sweeps(mod):
        state = 7
        for _ in range(2000):
            state, _ = mod.transmit_sweep(0.0, 0.0, xs, ys, active, segs,
                                          600.0, 350.0, 150.0, 0.1, 2, 5.0,
                                          state)

    def geometry(mod):
        for _ in range(20000):
            mod.line_intersection(1.0, 2.0, 37.0, -4.0, 8.0, 122.0)
            mod.bearing_class(0.0, 0.0, 45.0, 30.0, 31.0)

    def projection(mod):
        for _ in range(20000):
            x, y = mod.project_local(17.59, 78.12, 17.5913, 78.1207)
            mod.unproject_local(17.59, 78.12, x, y)

    return [("bsm_exchange 40 nodes x 50 ticks", exchange),
            ("transmit_sweep x 2000", sweeps),
            ("line/bearing geometry x 20k", geometry),
            ("geo projection round trip x 20k", projection)]


MACRO_SNIPPET = """
import time
from v2xsim.scenario import Scenario
from v2xsim.sim import run
import v2xsim._kernels as k
sc = Scenario.from_file({path!r})
t0 = time.perf_counter()
run(sc, collect_events=False)
print(k.BACKEND, time.perf_counter() - t0)
"""


def macro(backend):
    env = dict(os.environ, V2XSIM_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, "-c", MACRO_SNIPPET.format(path=SCENARIO)],
        capture_output=True, text=True, env=env, check=True)
    name, secs = out.stdout.split()
    return name, float(secs)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3,
                        help="best-of-N for each micro case")
    args = parser.parse_args()

    if _speedups is None:
        print("compiled extension not built; showing pure backend only")

    print(f"{'case':40s} {'pure':>10s} {'compiled':>10s} {'speedup':>8s}")
    for label, fn in micro_cases():
        tp = timed(lambda: fn(_pure), args.repeat)
        if _speedups is not None:
            tc = timed(lambda: fn(_speedups), args.repeat)
            print(f"{label:40s} {tp * 1e3:9.2f}ms {tc * 1e3:9.2f}ms "
                  f"{tp / tc:7.1f}x")
        else:
            print(f"{label:40s} {tp * 1e3:9.2f}ms {'-':>10s} {'-':>8s}")

    print()
    name_p, t_p = macro("pure")
    line = f"{'corridor scenario, full run':40s} {t_p * 1e3:9.2f}ms"
    if _speedups is not None:
        name_c, t_c = macro("c")
        assert (name_p, name_c) == ("pure", "compiled")
        line += f" {t_c * 1e3:9.2f}ms {t_p / t_c:7.1f}x"
    print(line)


if __name__ == "__main__":
    main()
