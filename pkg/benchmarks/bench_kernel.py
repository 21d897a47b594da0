"""Compiled kernel vs numpy fallback on the two hot paths.

    python benchmarks/bench_kernel.py [--repeat N]
"""

import argparse
import time

import numpy as np

from steerfilter import _kernel_py
from steerfilter.qcore import StateParams, family_state
from steerfilter.steering import _affine, seed_angles

try:
    from steerfilter import _kernel
except ImportError:
    _kernel = None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernel is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    F0, M = _affine(family_state(StateParams(0.452, 0.647)))
    F = np.ascontiguousarray(np.vstack([F0, M.T]))
    Z = np.zeros((4, 4))
    starts = seed_angles(2, np.random.default_rng(0))
    cases = {
        "min_radius (fixed directions)": lambda k: k.min_radius(F, Z),
        "direction_search (2 starts)": lambda k: k.direction_search(F0, M, starts)[0],
    }
    print(f"{'case':32s} {'compiled':>12s} {'python':>12s} {'speedup':>9s}  agree")
    for name, fn in cases.items():
        tc, rc = _time(lambda: fn(_kernel), args.repeat)
        tp, rp = _time(lambda: fn(_kernel_py), 1)
        vc = rc[0] if isinstance(rc, tuple) else rc
        vp = rp[0] if isinstance(rp, tuple) else rp
        print(f"{name:32s} {tc * 1e3:10.2f}ms {tp * 1e3:10.2f}ms {tp / tc:8.0f}x  {abs(vc - vp) < 1e-9}")


if __name__ == "__main__":
    main()
