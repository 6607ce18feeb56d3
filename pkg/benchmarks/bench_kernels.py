"""Time the hot kernels under numba and under the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read at
import time.  Usage::

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

WORKER = r"""
import json, sys, timeit
import numpy as np
from genptr import _accel, kernels

repeat = int(sys.argv[1])
g = np.random.default_rng(0)
counts = g.multinomial(400, g.dirichlet(np.ones(10)), size=2000).astype(float)
u0, u1 = g.uniform(size=200_000), g.uniform(size=200_000)
x = g.normal(size=(2000, 20)); x /= np.linalg.norm(x, axis=1, keepdims=True)
y = np.where(g.uniform(size=2000) < 0.5, -1.0, 1.0)
theta = g.normal(size=20)
a = g.normal(size=(40, 30)); h = a.T @ a
z = np.linspace(-50, 50, 200_000)

cases = {
    "rdp_gnmax_rows[2000x10]": lambda: kernels.rdp_gnmax_rows(counts, 40.0, 20.0, 40.0),
    "count_noisy_wins[2e5]": lambda: kernels.count_noisy_wins(3.0, 2.0, 1.0, u0, u1),
    "logistic_grad_hess[2000x20]": lambda: kernels.logistic_grad_hess(x, y, theta),
    "inverse_power_min_eig[30]": lambda: kernels.inverse_power_min_eig(h, 1e-9, 1e-10, 5000, np.linspace(1, 2, 30)),
    "lap_diff_tail_array[2e5]": lambda: kernels.lap_diff_tail_array(z),
}
out = {"numba": _accel.USING_NUMBA}
for name, fn in cases.items():
    fn()  # compile / warm up
    out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ, GENPTR_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    start = timeit.default_timer()
    jit, plain = run(False, args.repeat), run(True, args.repeat)
    if not jit.pop("numba") or plain.pop("numba"):
        sys.exit("backend switch did not take effect")
    print(f"{'kernel':32s} {'numba [s]':>12s} {'numpy [s]':>12s} {'speedup':>9s}")
    for name in jit:
        print(f"{name:32s} {jit[name]:12.3e} {plain[name]:12.3e} {plain[name] / jit[name]:8.1f}x")
    print(f"(wall time {timeit.default_timer() - start:.1f} s, best of {args.repeat})")


if __name__ == "__main__":
    main()
