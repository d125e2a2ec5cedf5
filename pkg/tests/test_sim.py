import io

import numpy as np
import pytest

from erevsim import cycles, sim
from erevsim.components import DIESEL_DENSITY
from erevsim.cycles import DrivingCycle
from erevsim.ems import EmsConfig
from erevsim.errors import ValidationError
from erevsim.powertrain import ControlDecision, Mode, wheel_torque

KINDS = ("SMSP", "DMSP", "DMPP")


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("scenario", ["electric", "hybrid"])
def test_zero_speed_cycle(archs, kind, scenario):
    tr = sim.simulate(archs[kind], DrivingCycle("rest", 1.0, np.zeros(30)), scenario=scenario)
    ix = sim.performance_indexes(tr)
    assert ix.EC == 0.0 and ix.FC == 0.0
    assert np.all(tr["soc"] == tr["soc"][0])
    assert sim.energy_audit(tr, archs[kind]) == 0.0


def test_invalid_inputs(archs):
    cyc = DrivingCycle("rest", 1.0, np.zeros(5))
    with pytest.raises(ValidationError):
        sim.simulate(archs["SMSP"], cyc, scenario="plugin")
    with pytest.raises(ValidationError):
        sim.simulate(archs["SMSP"], cyc, soc_init=0.95)
    with pytest.raises(ValidationError):
        sim.compare([], cyc)


@pytest.mark.parametrize("cycle", ["cbdc-synthetic", "ece15x5"])
def test_dual_drivetrains_identical_in_electric(matrix, cycle):
    a = matrix.trace(cycle, "DMSP", "electric")
    b = matrix.trace(cycle, "DMPP", "electric")
    assert a.csv_text() == b.csv_text()


@pytest.mark.parametrize("cycle", ["cbdc-synthetic", "ece15x5"])
@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("scenario", ["electric", "hybrid"])
def test_trace_invariants(matrix, archs, cycle, kind, scenario):
    tr = matrix.trace(cycle, kind, scenario)
    cfg = EmsConfig()
    assert np.all((tr["soc"] >= cfg.soc_min) & (tr["soc"] <= cfg.soc_max))
    assert np.all((tr["soc_end"] >= cfg.soc_min) & (tr["soc_end"] <= cfg.soc_max))
    np.testing.assert_array_equal(tr["soc"][1:], tr["soc_end"][:-1])
    assert np.all(tr["T_bF"] >= 0)
    ix = sim.performance_indexes(tr)
    assert ix.FC == pytest.approx(float(np.sum(tr["fuel_g"])) / DIESEL_DENSITY, rel=1e-12)
    assert sim.energy_audit(tr, archs[kind]) < 1e-3


@pytest.mark.parametrize("kind", KINDS)
def test_braking_torque_balance(matrix, archs, kind):
    tr = matrix.trace("cbdc-synthetic", kind, "electric")
    arch = archs[kind]
    names = arch.mode_names()
    braking = np.nonzero(tr["T_w"] < 0)[0]
    assert braking.size > 0
    for k in braking:
        mode = Mode(names[int(tr["mode"][k])], gear=int(tr["gear"][k]), odd=int(tr["odd"][k]), even=int(tr["even"][k]))
        dec = ControlDecision(mode, T_m0=tr["T_m0"][k], T_m1=tr["T_m1"][k], T_m2=tr["T_m2"][k], T_bF=tr["T_bF"][k])
        assert abs(wheel_torque(arch, dec) - tr["T_w"][k]) <= 1e-6 * max(1.0, abs(tr["T_w"][k]))


def test_regeneration_recovers_energy(matrix):
    tr = matrix.trace("cbdc-synthetic", "SMSP", "electric")
    assert np.any(tr["P_bat"] < 0)


@pytest.mark.parametrize("cycle", ["cbdc-synthetic", "ece15x5"])
def test_dual_motor_efficiency_above_single(matrix, cycle):
    single = sim.mean_motor_efficiency(matrix.trace(cycle, "SMSP", "electric"))
    dual = sim.mean_motor_efficiency(matrix.trace(cycle, "DMSP", "electric"))
    assert dual["m1"] > single["m0"] and dual["m2"] > single["m0"]


def test_mean_efficiency_near_anchors(matrix):
    e0 = sim.mean_motor_efficiency(matrix.trace("cbdc-synthetic", "SMSP", "electric"))
    e12 = sim.mean_motor_efficiency(matrix.trace("cbdc-synthetic", "DMSP", "electric"))
    assert e0["m0"] == pytest.approx(0.728, abs=0.01)
    assert e12["m1"] == pytest.approx(0.818, abs=0.01)
    assert e12["m2"] == pytest.approx(0.763, abs=0.01)


def test_trace_csv_roundtrip(matrix):
    tr = matrix.trace("ece15x5", "DMPP", "hybrid")
    data = sim.read_trace_csv(io.StringIO(tr.csv_text()))
    assert tuple(data) == sim.TRACE_COLUMNS
    for c in sim.TRACE_COLUMNS:
        np.testing.assert_array_equal(data[c], tr[c])
    with pytest.raises(ValidationError):
        sim.read_trace_csv(io.StringIO(""))
    with pytest.raises(ValidationError):
        sim.read_trace_csv(io.StringIO("a,b\n1,2\n"))


def test_report_self_reduction_zero(archs):
    cyc = cycles.ece15()
    rep = sim.compare([archs["DMSP"], archs["DMSP"]], cyc, ("electric",))
    for r in rep.rows:
        for k in ("EC", "FC", "HC", "CO", "NOx", "PM"):
            assert rep.reduction(r, k) == 0.0
    assert rep.to_csv().splitlines()[0].startswith("scenario,arch,EC,FC")
    assert "red%" in rep.to_table()


def test_simulation_deterministic(archs):
    cyc = cycles.ece15()
    a = sim.simulate(archs["DMPP"], cyc, scenario="hybrid")
    b = sim.simulate(archs["DMPP"], cyc, scenario="hybrid")
    assert a.csv_text() == b.csv_text()


def _indexes_at(archs, kind, scenario, dt):
    cyc = cycles.resample(cycles.builtin_cycle("ece15x5"), dt)
    return sim.performance_indexes(sim.simulate(archs[kind], cyc, scenario=scenario))


def test_halving_dt_changes_ec_below_one_percent(archs):
    a = _indexes_at(archs, "SMSP", "electric", 1.0)
    b = _indexes_at(archs, "SMSP", "electric", 0.5)
    assert abs(b.EC - a.EC) / a.EC < 0.01


def test_halving_dt_changes_fc_below_one_percent(matrix, archs):
    a = matrix.indexes("ece15x5", "DMPP", "hybrid")
    b = _indexes_at(archs, "DMPP", "hybrid", 0.5)
    assert abs(b.FC - a.FC) / a.FC < 0.01
