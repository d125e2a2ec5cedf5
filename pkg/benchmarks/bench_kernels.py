"""Compare the numba and numpy kernels on realistic problem sizes.

Usage: python3 benchmarks/bench_kernels.py [--runs N] [--json]
"""
import argparse
import json
import time

import numpy as np

from erevsim import components as comp
from erevsim import kernels


def best_of(func, runs):
    func()  # warm-up (includes JIT compilation on the first call)
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        func()
        times.append(time.perf_counter() - t0)
    return min(times)


def bilinear_case(rng, n=200_000):
    m = comp.default_components().motor0.efficiency_map
    x = rng.uniform(0, m.speed_grid[-1], n)
    y = rng.uniform(0, m.torque_grid[-1], n)
    args = (m.speed_grid, m.torque_grid, m.values, x, y)
    return (lambda: kernels.bilinear_numba(*args)), (lambda: kernels.bilinear_numpy(*args)), \
        np.max(np.abs(kernels.bilinear_numba(*args) - kernels.bilinear_numpy(*args)))


def dp_case(rng, stages=5, nodes=201, controls=67):
    bat = comp.default_components().battery
    soc0 = 0.5
    pbat = rng.uniform(-60e3, 120e3, (stages, controls))
    valid = rng.random((stages, controls)) > 0.1
    fuel = rng.uniform(0.0, 5.0, (stages, controls))
    sw0 = rng.uniform(0.0, 1.0, controls)
    sw = rng.uniform(0.0, 1.0, (stages, controls, controls))
    grid = np.array([np.linspace(0.45, 0.55, nodes)] * stages)
    ref = np.full(stages, 0.5)
    lo, hi = np.full(stages, 0.3), np.full(stages, 0.9)
    args = (soc0, grid, pbat, valid, fuel, sw0, sw, ref, 8000.0, lo, hi, 1.0, bat.capacity,
            bat.uoc_table, bat.r_dis_table, bat.r_chg_table)
    a = kernels.dp_forward_numba(*args)
    b = kernels.dp_forward_numpy(*args)
    same = a[0] == b[0] and np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])
    return (lambda: kernels.dp_forward_numba(*args)), (lambda: kernels.dp_forward_numpy(*args)), same


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed")
    rng = np.random.default_rng(0)
    results = {}
    f_nb, f_np, err = bilinear_case(rng)
    results["bilinear_200k"] = {"numba_s": best_of(f_nb, args.runs), "numpy_s": best_of(f_np, args.runs),
                                "max_abs_diff": float(err)}
    f_nb, f_np, same = dp_case(rng)
    results["dp_window_5x201x67"] = {"numba_s": best_of(f_nb, args.runs), "numpy_s": best_of(f_np, args.runs),
                                     "identical": bool(same)}
    for r in results.values():
        r["speedup"] = r["numpy_s"] / r["numba_s"]
    if args.json:
        print(json.dumps(results, indent=2, sort_keys=True))
        return
    for name, r in results.items():
        extra = {k: v for k, v in r.items() if k not in ("numba_s", "numpy_s", "speedup")}
        print(f"{name:<22} numba {r['numba_s'] * 1e3:8.2f} ms  numpy {r['numpy_s'] * 1e3:8.2f} ms  "
              f"speedup {r['speedup']:5.1f}x  {extra}")


if __name__ == "__main__":
    main()
