"""Time the numba and numpy paths of the hot kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first table calls both implementations in-process. The second runs a
small end-to-end workload in two subprocesses, one of them with
``FREEPOS_DISABLE_NUMBA=1``, so import-time backend selection is exercised too.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from freepos import _kernels as K

END_TO_END = """
import json, time
from freepos import BACKEND, measures as M
from freepos.freeconv import free_power
from freepos.rmt import Seed, sample_family
t0 = time.perf_counter()
free_power(M.discretize(M.Semicircle(0, 1), 200), 2.5)
t1 = time.perf_counter()
sample_family(25, 120, Seed(0, "bench"))
t2 = time.perf_counter()
print(json.dumps({"backend": BACKEND, "free_power_200_atoms": t1 - t0,
                  "gaussian_family_25x120": t2 - t1}))
"""


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def in_process(repeat):
    key = K.mix64(12345)
    x = np.sort(np.random.default_rng(0).standard_normal(200))
    p = np.full(200, 1 / 200)
    w = np.logspace(-8, 8, 10_000)
    cases = [
        ("gaussian_stream 2e6", lambda impl: impl(key, 2_000_000),
         K.gaussian_stream_numpy, K.gaussian_stream_numba),
        ("outer_gap_inverse 200x1e4", lambda impl: impl(x, p, w),
         K.outer_gap_inverse_numpy, K.outer_gap_inverse_numba),
    ]
    print(f"{'kernel':<28}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for name, call, np_impl, nb_impl in cases:
        t_np = best_of(lambda: call(np_impl), repeat)
        if nb_impl is None:
            print(f"{name:<28}{t_np:>12.4f}{'n/a':>12}{'':>10}")
            continue
        call(nb_impl)  # compile outside the timing
        t_nb = best_of(lambda: call(nb_impl), repeat)
        print(f"{name:<28}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x")


def end_to_end():
    rows = []
    for disable in ("0", "1"):
        env = dict(os.environ, FREEPOS_DISABLE_NUMBA=disable)
        # run twice so the numba on-disk cache is warm for the timed run
        for _ in range(2):
            out = subprocess.run([sys.executable, "-c", END_TO_END], env=env,
                                 capture_output=True, text=True, check=True)
        rows.append(json.loads(out.stdout))
    print(f"\n{'backend':<10}{'free_power 200 atoms [s]':>27}{'family 25x120 [s]':>20}")
    for r in rows:
        print(f"{r['backend']:<10}{r['free_power_200_atoms']:>27.4f}{r['gaussian_family_25x120']:>20.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    in_process(args.repeat)
    end_to_end()


if __name__ == "__main__":
    main()
