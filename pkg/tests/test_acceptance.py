"""Acceptance criteria 1-9.  Each test records one PASS/FAIL line shown in the terminal summary."""
import io
import math
import time

import numpy as np
import pytest
from conftest import CYCLES, SCENARIOS, record_acceptance
from oracles import brute_force_horizon, current_integration_rate, random_window, soc_rate

from erevsim import cli, cycles, sim, sizing
from erevsim import components as comp
from erevsim.ems import EmsConfig, dp_solve_horizon
from erevsim.errors import InfeasibleHorizon, SocConstraintViolation
from erevsim.powertrain import Mode, component_speeds
from erevsim.vehicle import VehicleParams, ideal_rear_force, rear_adhesion_limit, split_braking

KINDS = ("SMSP", "DMSP", "DMPP")


def check(number, failures, detail):
    record_acceptance(number, not failures, "; ".join(failures) if failures else detail)
    assert not failures, failures


def test_criterion_1_sizing(tmp_path):
    t0 = time.perf_counter()
    code = cli.main(["size", "--out", str(tmp_path)], stdout=io.StringIO(), stderr=io.StringIO())
    elapsed = time.perf_counter() - t0
    rep = sizing.size_all()
    smsp, dmsp = rep.gears["SMSP"], rep.gears["DMSP"]
    perf = rep.performance["SMSP"]
    fails = []
    if code != 0:
        fails.append(f"size exited {code}")
    for i, (got, want) in enumerate(zip(smsp.ratios, (5.0, 3.8, 2.8, 2.1)), 1):
        if abs(got - want) > 0.15:
            fails.append(f"SMSP i{i} {got:.2f} vs {want}")
    if smsp.i0 != 5.2:
        fails.append(f"i0 {smsp.i0}")
    if abs(perf.v_max_kmh - 81.7) > 0.2:
        fails.append(f"v_max {perf.v_max_kmh:.2f} km/h")
    if abs(perf.grade_max_pct - 47.3) > 1.5:
        fails.append(f"grade {perf.grade_max_pct:.2f}%")
    if abs(dmsp.ratios[0] - 5.9) > 0.2 or abs(dmsp.ratios[3] - 2.1) > 0.1:
        fails.append(f"DMSP i1 {dmsp.ratios[0]:.2f} i4 {dmsp.ratios[3]:.2f}")
    if elapsed >= 5.0:
        fails.append(f"runtime {elapsed:.2f} s")
    check(1, fails, f"SMSP {'/'.join(f'{r:.1f}' for r in smsp.ratios)} i0 {smsp.i0}, v_max {perf.v_max_kmh:.2f} km/h, "
                    f"grade {perf.grade_max_pct:.1f}%, DMSP i1 {dmsp.ratios[0]:.2f} i4 {dmsp.ratios[3]:.2f}, "
                    f"{elapsed:.2f} s")


def test_criterion_2_top_speed_motor_speed(archs):
    w = component_speeds(archs["SMSP"], 81.7 / 3.6, Mode("E-drive", gear=4))["w_m0"]
    rpm = w / comp.RPM
    err = abs(rpm - 4500.0) / 4500.0
    check(2, [f"{rpm:.1f} rpm"] if err > 0.005 else [], f"{rpm:.1f} rpm ({err * 100:.3f}% from 4500)")


def test_criterion_3_dp_equals_brute_force(archs):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    matched = mismatched = tries = 0
    fails = []
    while matched + mismatched < 100 and tries < 1000:
        tries += 1
        arch = archs[KINDS[tries % 3]]
        cfg = EmsConfig(soc_grid_points=int(rng.integers(2, 8)))
        win = random_window(rng, arch, cfg, int(rng.integers(1, 4)), int(rng.integers(1, 7)), bounded=tries % 3 == 0)
        soc0 = float(rng.uniform(0.35, 0.85))
        prev = None if tries % 4 == 0 else win.features[0, 0] + 1.0
        expected, _ = brute_force_horizon(arch, win, soc0, prev, cfg)
        if math.isinf(expected):
            continue
        try:
            got = dp_solve_horizon(arch, win, soc0, prev, cfg).cost
        except (SocConstraintViolation, InfeasibleHorizon):
            got = math.inf
        if got == expected:
            matched += 1
        else:
            mismatched += 1
            fails.append(f"instance {tries}: {got!r} != {expected!r}")
    elapsed = time.perf_counter() - t0
    if matched + mismatched < 100:
        fails.append(f"only {matched + mismatched} feasible instances")
    if elapsed >= 10.0:
        fails.append(f"runtime {elapsed:.2f} s")
    check(3, fails[:5], f"{matched}/{matched + mismatched} feasible instances exact, {elapsed:.2f} s")


def test_criterion_4_soc_rate_oracle(archs):
    bat = archs["SMSP"].components.battery
    worst = 0.0
    fails = []
    for soc in np.linspace(0.1, 0.9, 9):
        for p in np.linspace(-100e3, 100e3, 21):
            got = soc_rate(bat, soc, p)
            r = float(bat.r_int(soc, "discharge" if p >= 0 else "charge"))
            ref = current_integration_rate(float(bat.u_oc(soc)), r, bat.capacity, p, substeps=20)
            if ref == 0.0:
                if got != 0.0:
                    fails.append(f"soc {soc:.1f} P 0: {got}")
                continue
            rel = abs(got - ref) / abs(ref)
            worst = max(worst, rel)
            if not rel <= 1e-6:
                fails.append(f"soc {soc:.1f} P {p / 1e3:.0f} kW rel {rel:.2e}")
    check(4, fails[:5], f"189 points, worst relative error {worst:.2e}")


def test_criterion_5_charge_sustaining(matrix):
    fails, parts = [], []
    for cyc in CYCLES:
        for kind in KINDS:
            tr = matrix.trace(cyc, kind, "hybrid")
            secs = matrix.seconds[(cyc, kind, "hybrid")]
            parts.append(f"{cyc}/{kind} {tr.soc_final:.4f} ({secs:.0f} s)")
            if abs(tr.soc_final - 0.30) > 0.005:
                fails.append(f"{cyc}/{kind} final SOC {tr.soc_final:.4f}")
            if secs >= 120.0:
                fails.append(f"{cyc}/{kind} runtime {secs:.0f} s")
    check(5, fails, ", ".join(parts))


def _reduction(base, other):
    return (base - other) / base


def test_criterion_6_comparison_pattern(matrix):
    fails, parts = [], []
    for cyc in CYCLES:
        el = {k: matrix.indexes(cyc, k, "electric") for k in KINDS}
        hy = {k: matrix.indexes(cyc, k, "hybrid") for k in KINDS}
        for k in ("DMSP", "DMPP"):
            r = _reduction(el["SMSP"].EC, el[k].EC)
            if r < 0.05:
                fails.append(f"{cyc}: {k} EC reduction {r:.1%}")
        if not hy["SMSP"].FC > hy["DMSP"].FC > hy["DMPP"].FC:
            fails.append(f"{cyc}: FC order {[round(hy[k].FC, 4) for k in KINDS]}")
        r_fc = _reduction(hy["SMSP"].FC, hy["DMPP"].FC)
        if r_fc < 0.08:
            fails.append(f"{cyc}: DMPP FC reduction {r_fc:.1%}")
        for sp in ("HC", "CO", "NOx", "PM"):
            base = getattr(hy["SMSP"], sp)
            if not getattr(hy["DMSP"], sp) < base:
                fails.append(f"{cyc}: DMSP {sp} not improved")
            dmpp = getattr(hy["DMPP"], sp)
            if sp == "NOx" and not dmpp < base:
                fails.append(f"{cyc}: DMPP NOx not improved")
            if sp != "NOx" and not dmpp > base:
                fails.append(f"{cyc}: DMPP {sp} not worse")
        parts.append(f"{cyc} EC -{_reduction(el['SMSP'].EC, el['DMSP'].EC):.1%}, FC DMSP "
                     f"-{_reduction(hy['SMSP'].FC, hy['DMSP'].FC):.1%} DMPP -{r_fc:.1%}")
    total = sum(matrix.seconds[(c, k, s)] for c in CYCLES for k in KINDS for s in SCENARIOS)
    if total >= 900.0:
        fails.append(f"matrix runtime {total:.0f} s")
    check(6, fails, "; ".join(parts) + f"; matrix {total:.0f} s")


def test_criterion_7_energy_audit(matrix, archs):
    fails = []
    worst = 0.0
    for cyc in CYCLES:
        for kind in KINDS:
            for sc in SCENARIOS:
                res = sim.energy_audit(matrix.trace(cyc, kind, sc), archs[kind])
                worst = max(worst, res)
                if not res < 1e-3:
                    fails.append(f"{cyc}/{kind}/{sc} residual {res:.2e}")
    base = cycles.builtin_cycle("ece15x5")
    dts = (1.0, 2.0, 4.0)
    res = [sim.energy_audit(sim.simulate(archs["SMSP"], cycles.resample(base, dt), scenario="electric"), archs["SMSP"])
           for dt in dts]
    slope = float(np.polyfit(np.log(dts), np.log(res), 1)[0])
    if not 0.7 <= slope <= 1.3:
        fails.append(f"residual order {slope:.2f}")
    check(7, fails, f"worst residual {worst:.2e}, order in dt {slope:.2f}")


def test_criterion_8_compare_reproducible():
    def run(*extra):
        out = io.StringIO()
        code = cli.main(["compare", "--scenario", "electric", "--scenario", "hybrid",
                         "--format", "csv", *extra], stdout=out, stderr=io.StringIO())
        assert code == 0
        return out.getvalue().encode()

    a, b, c = run(), run(), run("--workers", "2")
    fails = []
    if a != b:
        fails.append("serial runs differ")
    if a != c:
        fails.append("parallel run differs")
    check(8, fails, f"3 runs byte-identical ({len(a)} bytes, serial and 2 workers)")


def test_criterion_9_braking_split():
    p = VehicleParams()
    rng = np.random.default_rng(9)
    fails = []
    rear_first = ideal = 0
    for _ in range(1000):
        F = float(rng.uniform(0.0, 0.9 * p.weight))
        emergency = bool(rng.random() < 0.2)
        cap = math.inf if rng.random() < 0.3 else float(rng.uniform(0.0, p.weight))
        s = split_braking(F, p, emergency, cap)
        if abs(s.F_xF + s.F_xR - F) > 1e-6:
            fails.append(f"F {F:.1f}: sum {s.F_xF + s.F_xR:.6f}")
        threshold = min(cap, rear_adhesion_limit(F, p))
        if not emergency and F <= threshold:
            rear_first += 1
            if s.F_xF != 0.0:
                fails.append(f"F {F:.1f}: front {s.F_xF} below threshold")
        else:
            ideal += 1
            if abs(s.F_xR - ideal_rear_force(s.F_xF, p)) > 1e-6:
                fails.append(f"F {F:.1f}: off ideal curve")
    if not rear_first or not ideal:
        fails.append("sample did not cover both regimes")
    check(9, fails[:5], f"1000 demands: {rear_first} rear-only, {ideal} on the ideal curve")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
