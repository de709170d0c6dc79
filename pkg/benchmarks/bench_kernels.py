"""Compiled vs numpy kernels: one RHS evaluation and a short integration.

    python3 benchmarks/bench_kernels.py [--sizes 16 32 64] [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from warpflow import _fallback, kernels
from warpflow.basegeom import eval_metric
from warpflow.grid import build_chart_grid

try:
    from warpflow import _kernels as compiled
except ImportError:
    compiled = None


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n0: int, repeat: int, steps: int):
    grid = build_chart_grid((n0, 2 * n0), ("pole", "periodic"))
    metric = eval_metric("round-sphere", None, grid)
    lay = kernels.layout(metric)
    theta = grid.mesh()[0]
    phi0 = np.ascontiguousarray(np.log(1 + 0.2 * np.cos(theta)))
    dt = 0.5 * grid.h_min**2 / (2 * 2 * kernels.rhs(phi0, lay)[1])
    rows = []
    for name, impl in (("cython", compiled), ("numpy", _fallback)):
        if impl is None:
            continue
        t_rhs = _best(lambda: impl.rhs(phi0, *lay.args, False), repeat)

        def integ():
            p = phi0.copy()
            impl.integrate(p, 0.0, steps * dt, *lay.args, 0.5, 4, dt, steps + 1, False)

        t_int = _best(integ, repeat)
        rows.append((name, t_rhs, t_int))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args(argv)
    print(f"{'grid':>8} {'backend':>8} {'rhs [us]':>10} {'ns/node':>8} {'rk4 x' + str(args.steps) + ' [ms]':>14} {'speedup':>8}")
    for n0 in args.sizes:
        rows = bench(n0, args.repeat, args.steps)
        nodes = 2 * n0 * n0
        ref = {name: t_int for name, _, t_int in rows}
        for name, t_rhs, t_int in rows:
            speed = ref.get("numpy", t_int) / t_int
            print(f"{n0}x{2 * n0:<5} {name:>8} {1e6 * t_rhs:10.1f} {1e9 * t_rhs / nodes:8.1f} "
                  f"{1e3 * t_int:14.2f} {speed:8.2f}")


if __name__ == "__main__":
    main()
