import io
import math

import numpy as np
import pytest
from oracles import current_integration_rate

from erevsim import components as comp
from erevsim.components import (ComponentMap, battery_power_dual, battery_power_smsp, bus_to_battery,
                                egu_optimal_point, map_lookup, motor_max_torque, soc_derivative,
                                soc_derivative_raw)
from erevsim.errors import (BatteryPowerLimitError, CapabilityError, InfeasibleOperatingPoint, LookupRangeError,
                            ValidationError)


@pytest.fixture(scope="module")
def parts():
    return comp.default_components()


# maps

def test_lookup_at_nodes_is_exact(parts):
    m = parts.motor0.efficiency_map
    S, T = np.meshgrid(m.speed_grid, m.torque_grid, indexing="ij")
    np.testing.assert_array_equal(m.lookup(S, T), m.values)


def test_bilinear_surface_reproduced():
    sg, tg = np.array([0.0, 2.0, 5.0]), np.array([0.0, 1.0, 4.0])
    S, T = np.meshgrid(sg, tg, indexing="ij")
    m = ComponentMap(sg, tg, 1.0 + 0.5 * S + 0.25 * T + 0.1 * S * T, "fuel_rate_g_per_s")
    x, y = 3.5, 2.5
    assert abs(map_lookup(m, x, y) - (1.0 + 0.5 * x + 0.25 * y + 0.1 * x * y)) < 1e-12


def test_out_of_hull_names_axis(parts):
    m = parts.motor0.efficiency_map
    with pytest.raises(LookupRangeError) as e1:
        m.lookup(m.speed_grid[-1] * 1.1, 0.0)
    assert e1.value.axis == "speed"
    with pytest.raises(LookupRangeError) as e2:
        m.lookup(0.0, -1.0)
    assert e2.value.axis == "torque"


def test_map_validation():
    with pytest.raises(ValidationError):
        ComponentMap([0, 1], [0, 1], [[0.5, 0.5], [0.5, 1.5]], "efficiency")
    with pytest.raises(ValidationError):
        ComponentMap([1, 0], [0, 1], np.ones((2, 2)), "fuel_rate_g_per_s")
    with pytest.raises(ValidationError):
        ComponentMap([0, 1], [0, 1], np.ones((2, 2)), "other")


def test_map_csv_roundtrip(parts):
    m = parts.engine.emission_maps["NOx"]
    buf = io.StringIO()
    m.to_csv(buf)
    back = ComponentMap.from_csv(io.StringIO(buf.getvalue()), "emission_rate_g_per_s")
    np.testing.assert_array_equal(back.values, m.values)
    np.testing.assert_array_equal(back.speed_grid, m.speed_grid)


# motors

def test_motor_envelope_examples(parts):
    assert motor_max_torque(parts.motor0, 100.0) == pytest.approx(1426.0, abs=0.1)
    assert motor_max_torque(parts.motor1, parts.motor1.base_speed) == pytest.approx(713.0, abs=0.1)
    assert parts.motor0.max_speed == pytest.approx(471.24, abs=0.01)
    assert motor_max_torque(parts.motor0, parts.motor0.max_speed) == pytest.approx(475.3, abs=0.1)


def test_motor_envelope_continuous_at_base(parts):
    m = parts.motor0
    a = motor_max_torque(m, m.base_speed * (1 - 1e-12))
    b = motor_max_torque(m, m.base_speed * (1 + 1e-12))
    assert a == pytest.approx(b, rel=1e-9)


def test_motor_speed_range(parts):
    with pytest.raises(LookupRangeError):
        motor_max_torque(parts.motor0, parts.motor0.max_speed * 1.01)
    with pytest.raises(LookupRangeError):
        motor_max_torque(parts.motor0, -1.0)


def test_motor_efficiency_in_range(parts):
    for m in (parts.motor0, parts.motor1, parts.motor2, parts.generator):
        assert np.all((m.efficiency_map.values > 0) & (m.efficiency_map.values <= 1))


def test_electrical_power_sign(parts):
    m = parts.motor0
    w, t = 200.0, 500.0
    eta = m.efficiency(w, t)
    assert m.electrical_power(w, t) == pytest.approx(w * t / eta)
    assert m.electrical_power(w, -t) == pytest.approx(-w * t * eta)


# engine

def test_fuel_minimum_location(parts):
    e = parts.engine
    S, T = np.meshgrid(e.fuel_map.speed_grid, e.fuel_map.torque_grid[1:], indexing="ij")
    ok = e.in_envelope(S, T)
    bsfc = np.where(ok, e.fuel_map.lookup(S, T) * 3.6e6 / (S * T), np.inf)
    best = bsfc.min()
    assert 200.0 <= best <= 220.0
    w = 1800 * comp.RPM
    t = 0.8 * float(e.torque_envelope(w))
    assert float(e.bsfc(w, t)) <= 1.05 * best


def test_zero_torque_idle_rate(parts):
    assert parts.engine.fuel_rate(parts.engine.idle_speed, 0.0) > 0


def test_engine_envelope_enforced(parts):
    e = parts.engine
    with pytest.raises(InfeasibleOperatingPoint):
        e.fuel_rate(2000 * comp.RPM, 400.0)
    with pytest.raises(InfeasibleOperatingPoint):
        e.emission_rate(500 * comp.RPM, 50.0, "NOx")
    with pytest.raises(KeyError):
        e.emission_rate(2000 * comp.RPM, 50.0, "SO2")


def test_envelope_shape(parts):
    e = parts.engine
    assert float(e.torque_envelope(2000 * comp.RPM)) == pytest.approx(280.0)
    assert float(e.torque_envelope(e.max_speed)) == pytest.approx(88e3 / e.max_speed)


def test_nox_increases_with_torque(parts):
    e = parts.engine
    for rpm in (1200, 1800, 2600, 3500):
        w = rpm * comp.RPM
        t = np.linspace(0.0, float(e.torque_envelope(w)), 60)
        assert np.all(np.diff(e.emission_rate(w, t, "NOx")) > 0)


def test_co_concentrated_at_lug(parts):
    e = parts.engine
    w_lo = 1000 * comp.RPM
    t_lo = 0.95 * float(e.torque_envelope(w_lo))
    lug = e.emission_rate(w_lo, t_lo, "CO")
    for rpm in (1800, 2200, 2600, 3000):
        w_mid = rpm * comp.RPM
        t_mid = w_lo * t_lo / w_mid
        assert t_mid <= 0.6 * float(e.torque_envelope(w_mid))
        assert lug > e.emission_rate(w_mid, t_mid, "CO")


def test_hc_specific_falls_with_load():
    hc = comp.DEFAULT_EMISSIONS["HC"]
    loads = np.linspace(0.05, 1.0, 30)
    assert np.all(np.diff(hc.specific(loads, 0.5)) < 0)


# engine-generator unit

def test_egu_line_monotone(parts):
    powers = np.linspace(2e3, 70e3, 30)
    speeds = [egu_optimal_point(parts.engine, parts.generator, p)[0] for p in powers]
    assert np.all(np.diff(speeds) >= 0)


def test_egu_point_is_grid_optimal(parts):
    e, g = parts.engine, parts.generator
    power = 35e3
    w_best, t_best = egu_optimal_point(e, g, power)
    best = float(e.fuel_map.lookup(w_best, t_best))
    for w in comp.egu_speed_grid(e, g):
        t = comp._generator_torque_for_power(g, np.array([w]), power)[0]
        if not (e.in_envelope(w, t) and abs(w * t * g.efficiency(w, t) - power) <= 1e-6 * power):
            continue
        assert best <= float(e.fuel_map.lookup(w, t)) + 1e-12


def test_egu_small_power_lowest_speed(parts):
    w, _ = egu_optimal_point(parts.engine, parts.generator, 1.0)
    assert w == pytest.approx(parts.engine.idle_speed)


def test_egu_capability_errors(parts):
    with pytest.raises(CapabilityError):
        egu_optimal_point(parts.engine, parts.generator, 500e3)
    with pytest.raises(ValueError):
        egu_optimal_point(parts.engine, parts.generator, 0.0)


# battery

def test_soc_derivative_zero_power(parts):
    assert soc_derivative(parts.battery, 0.5, 0.0) == 0.0


def test_soc_derivative_hand_example():
    d = soc_derivative_raw(680.0, 0.12, 648000.0, 50e3)
    current = (680 - math.sqrt(680 ** 2 - 4 * 50000 * 0.12)) / (2 * 0.12)
    assert current == pytest.approx(74.5, abs=0.05)
    assert d == pytest.approx(-1.149e-4, rel=1e-3)


def test_soc_derivative_small_power_limit(parts):
    b = parts.battery
    p = 1.0
    d = soc_derivative(b, 0.6, p)
    assert d == pytest.approx(-p / (float(b.u_oc(0.6)) * b.capacity), rel=1e-5)


def test_soc_derivative_power_limit(parts):
    with pytest.raises(BatteryPowerLimitError):
        soc_derivative(parts.battery, 0.5, 5e6)
    with pytest.raises(ValidationError):
        soc_derivative(parts.battery, 1.2, 0.0)


def test_battery_tables(parts):
    b = parts.battery
    assert float(b.u_oc(0.5)) == pytest.approx(680.0)
    assert float(b.r_int(0.5, "discharge")) == pytest.approx(0.12)
    assert float(b.r_int(0.5, "charge")) == pytest.approx(0.15)
    assert np.all(np.diff(b.uoc_table) > 0)
    assert b.r_int(0.1, "discharge") > b.r_int(0.5, "discharge") < b.r_int(0.9, "discharge")


@pytest.mark.parametrize("soc,p", [(0.1, 100e3), (0.3, -100e3), (0.5, 37e3), (0.9, -5e3), (0.7, 1.0)])
def test_soc_rate_matches_current_oracle(parts, soc, p):
    b = parts.battery
    r = float(b.r_int(soc, "discharge" if p >= 0 else "charge"))
    oracle = current_integration_rate(float(b.u_oc(soc)), r, b.capacity, p, substeps=20)
    assert soc_derivative(b, soc, p) == pytest.approx(oracle, rel=1e-6)


def test_terminal_energy_balance(parts):
    b = parts.battery
    dt, p, soc = 1.0, 80e3, 0.8
    e_out = e_loss = 0.0
    start = soc
    for _ in range(600):
        r = float(b.r_int(soc, "discharge"))
        i = float(b.current(soc, p))
        e_out += p * dt
        e_loss += i * i * r * dt
        soc += float(b.dsoc(soc, p)) * dt
    internal = float(b.ocv_energy(start, soc))
    assert (e_out + e_loss) == pytest.approx(internal, rel=1e-3)


def test_battery_power_smsp_examples():
    assert battery_power_smsp(0.0, 0.9, 0.95) == 0.0
    assert battery_power_smsp(100e3, 0.9, 0.95) == pytest.approx(116.96e3, abs=5)
    assert battery_power_smsp(-100e3, 0.9, 0.95) == pytest.approx(-85.5e3)


def test_battery_power_dual_examples():
    assert battery_power_dual(0.0, 0.9, 0.0, 0.9, 0.95) == 0.0
    assert battery_power_dual(50e3, 0.9, -20e3, 0.9, 0.95) == pytest.approx(39.53e3, abs=5)
    assert battery_power_dual(70e3, 0.85, 0.0, 0.9, 0.95) == pytest.approx(battery_power_smsp(70e3, 0.85, 0.95))


@pytest.mark.parametrize("eta", [0.7, 0.9, 0.99])
def test_regen_never_exceeds_drive(eta):
    drive = battery_power_smsp(50e3, eta, 0.95)
    regen = battery_power_smsp(-50e3, eta, 0.95)
    assert abs(regen) < abs(drive)
    assert abs(battery_power_smsp(-50e3, 1.0, 1.0)) == battery_power_smsp(50e3, 1.0, 1.0)


def test_bus_to_battery():
    np.testing.assert_allclose(bus_to_battery([95.0, -100.0, 0.0], 0.95), [100.0, -95.0, 0.0])


def test_battery_validation():
    with pytest.raises(ValidationError):
        comp.BatterySpec(1.0, [1, 2], [1, 1], [1, 1], soc_min=0.9, soc_max=0.3)
    with pytest.raises(ValidationError):
        comp.BatterySpec(1.0, [1, 2], [1, 1], [1])
