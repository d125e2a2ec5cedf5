"""Fit per-motor loss scale factors to target mean working-point efficiencies.

Each traction motor keeps the shape of the default loss family and gets one
scale factor.  Given the working points of an electric-only run on the
synthetic CBDC cycle, the factor is found by bisection so that the mean
efficiency over those points hits the target.  Because the optimiser reacts
to the new maps, the run is repeated until the factors settle.

Usage: python3 scripts/fit_motor_losses.py [iterations]
"""
import sys

import numpy as np

from erevsim import components as comp
from erevsim import cycles, ems, powertrain, sim

TARGETS = {"motor0": 0.728, "motor1": 0.818, "motor2": 0.763}
RUNS = {"motor0": ("SMSP", "m0"), "motor1": ("DMSP", "m1"), "motor2": ("DMSP", "m2")}


def points(trace, key):
    d = trace.data
    w, T = d["w_" + key], d["T_" + key]
    on = (T * w != 0) & np.isfinite(d["P_" + key])
    return w[on], T[on]


def mean_eff(spec, w, T):
    return float(np.mean(spec.efficiency(w, T)))


def fit_scale(name, base, w, T, target):
    lo, hi = 0.05, 50.0
    peak, max_rpm, base_rpm = {"motor0": (224e3, 4500, 1500)}.get(name, (112e3, 4500, 1500))
    for _ in range(60):
        mid = np.sqrt(lo * hi)
        spec = comp.make_motor(name, peak, max_rpm, base_rpm, base.scaled(mid))
        if mean_eff(spec, w, T) > target:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def main(iterations=4):
    cycle = cycles.builtin_cycle("cbdc-synthetic")
    base = comp.LossCoefficients()
    scale = {name: 1.0 for name in TARGETS}
    for it in range(iterations):
        losses = {name: base.scaled(s) for name, s in scale.items()}
        comps = comp.default_components(motor_losses=losses)
        traces = {kind: sim.simulate(powertrain.default_architecture(kind, components=comps), cycle,
                                     ems.EmsConfig(), "electric") for kind in ("SMSP", "DMSP")}
        for name, (kind, key) in RUNS.items():
            w, T = points(traces[kind], key)
            got = sim.mean_motor_efficiency(traces[kind])[key]
            scale[name] = fit_scale(name, base, w, T, TARGETS[name])
            print(f"iter {it} {name}: mean {got:.4f} -> scale {scale[name]:.4f}")
    for name, s in scale.items():
        c = base.scaled(s)
        print(f'"{name}": LossCoefficients({c.copper:.6g}, {c.iron:.6g}, {c.windage:.6g}, {c.const:.6g}),')


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 4)
