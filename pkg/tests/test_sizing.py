import dataclasses
import math

import pytest

from erevsim import components as comp
from erevsim import sizing
from erevsim.errors import SizingInfeasible, ValidationError
from erevsim.powertrain import default_architecture
from erevsim.sizing import SizingRequirements
from erevsim.vehicle import VehicleParams, load_torque

P = VehicleParams()
REQ = SizingRequirements()


@pytest.fixture(scope="module")
def report():
    return sizing.size_all()


def test_requirement_validation():
    with pytest.raises(ValidationError):
        SizingRequirements(t_a=0.0)
    with pytest.raises(ValidationError):
        SizingRequirements(v_f=30.0)
    with pytest.raises(ValidationError):
        SizingRequirements(gear_count=5)


def test_acceleration_power_resistance_free():
    p = VehicleParams(f_r=0.0, C_d=0.0)
    expected = p.delta * p.M * (REQ.v_f ** 2 + REQ.v_b ** 2) / (2 * REQ.t_a)
    assert sizing.motor_power_acceleration(REQ, p) == pytest.approx(expected, rel=1e-12)


def test_doubling_ta_halves_inertia_term():
    p = VehicleParams(f_r=0.0, C_d=0.0)
    slow = dataclasses.replace(REQ, t_a=2 * REQ.t_a)
    assert sizing.motor_power_acceleration(slow, p) == pytest.approx(0.5 * sizing.motor_power_acceleration(REQ, p))


def test_acceleration_power_anchor():
    assert sizing.motor_power_acceleration(REQ, P) == pytest.approx(224e3, abs=100)


def test_grade_power_hand_evaluation():
    phi = math.atan(0.5)
    v = 2.778
    force = P.weight * math.sin(phi) + P.weight * P.f_r * math.cos(phi) + 0.5 * 1.2 * 0.65 * 7.5 * v * v
    assert sizing.motor_power_grade(REQ, P) == pytest.approx(force * v, rel=1e-12)
    flat = VehicleParams(f_r=0.0)
    tiny = dataclasses.replace(REQ, grade_max=1e-9, v_at_grade=0.01)
    assert sizing.motor_power_grade(tiny, flat) < 1e-3


def test_motor_power_selection():
    mp = sizing.select_motor_power(REQ, P)
    assert mp.P_grade < mp.P_accel
    assert mp.P_m0 == mp.P_accel
    assert mp.P_m0 == pytest.approx(224e3, abs=100)
    assert mp.P_m1 == mp.P_m2 == mp.P_m0 / 2


def test_geometric_ratios():
    r = sizing.geometric_ratios(5.0, 2.1)
    assert r[0] == 5.0 and r[-1] == 2.1
    assert r[1] / r[2] == pytest.approx(r[0] / r[1], abs=0.05)


def test_smsp_ratios(report):
    g = report.gears["SMSP"]
    assert g.i0 == 5.2
    for got, want in zip(g.ratios, (5.0, 3.8, 2.8, 2.1)):
        assert got == pytest.approx(want, abs=0.15)


@pytest.mark.parametrize("kind", ["DMSP", "DMPP"])
def test_dual_ratios(report, kind):
    r = report.gears[kind].ratios
    assert r[0] == pytest.approx(5.9, abs=0.2)
    assert r[3] == pytest.approx(2.1, abs=1e-9)


@pytest.mark.parametrize("kind", sizing.KINDS)
def test_design_equations_hold(report, kind):
    g = report.gears[kind]
    assert all(a > b for a, b in zip(g.ratios, g.ratios[1:]))
    assert g.grade_capability >= (1 - REQ.slack) * g.grade_torque
    assert g.top_capability >= g.top_torque
    # 4th gear puts the motor at its maximum speed just above the target speed
    v_top = REQ.motor_max_rpm * comp.RPM * P.r_t / (g.ratios[3] * g.i0)
    assert REQ.v_max_target <= v_top <= REQ.v_max_target * 1.05


def test_performance_table(report):
    perf = report.performance
    for k in sizing.KINDS:
        assert perf[k].v_max_kmh == pytest.approx(81.7, abs=0.2)
    assert perf["SMSP"].grade_max_pct == pytest.approx(47.3, abs=1.5)
    assert perf["DMSP"].grade_max_pct == pytest.approx(47.2, abs=1.5)


def test_default_ratio_orderings():
    perf = {k: sizing.verify_performance(default_architecture(k)) for k in sizing.KINDS}
    assert abs(perf["SMSP"].grade_max_pct - perf["DMSP"].grade_max_pct) < 2.0
    assert max(perf["SMSP"].grade_max_pct, perf["DMSP"].grade_max_pct) < perf["DMPP"].grade_max_pct
    assert abs(perf["SMSP"].v_10s_kmh - perf["DMSP"].v_10s_kmh) < 3.0
    assert max(perf["SMSP"].v_10s_kmh, perf["DMSP"].v_10s_kmh) < perf["DMPP"].v_10s_kmh


def test_undersized_motor_is_infeasible():
    small = comp.make_motor("tiny", 20e3, 4500, 1500)
    with pytest.raises(SizingInfeasible) as exc:
        sizing.select_gear_ratios(REQ, P, small, "SMSP")
    assert exc.value.deficit > 0


def test_grade_requirement_matches_load_torque(report):
    assert report.gears["SMSP"].grade_torque == pytest.approx(float(load_torque(2.778, 0.5, P)))


def test_report_formats(report):
    text = report.to_text()
    csv = report.to_csv()
    for k in sizing.KINDS:
        assert k in text and k in csv
    assert csv.splitlines()[0].count(",") >= 5
