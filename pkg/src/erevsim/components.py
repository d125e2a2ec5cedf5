"""Component maps and state models: motors, generator, engine and battery.

The gridded surfaces are generated from parametric loss/fuel/emission families
calibrated to a handful of anchor numbers (224/112/112 kW motors, 76 kW
generator, 2.5 L 88 kW diesel, 680 V 180 Ah pack).  Any map can be replaced by
tabulated data through :meth:`ComponentMap.from_csv`.
"""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    BatteryPowerLimitError,
    CapabilityError,
    InfeasibleOperatingPoint,
    LookupRangeError,
    ValidationError,
)

RPM = math.pi / 30.0
MAP_KINDS = ("efficiency", "fuel_rate_g_per_s", "emission_rate_g_per_s")
SPECIES = ("HC", "CO", "NOx", "PM")
GRID_TOL = 1e-9
ETA_FLOOR = 0.05
DIESEL_LHV = 42800.0  # J/g
DIESEL_DENSITY = 832.0  # g/dm^3


@dataclass(frozen=True, eq=False)
class ComponentMap:
    speed_grid: np.ndarray
    torque_grid: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self):
        sg = np.array(self.speed_grid, dtype=float)
        tg = np.array(self.torque_grid, dtype=float)
        vals = np.array(self.values, dtype=float)
        if self.kind not in MAP_KINDS:
            raise ValidationError(f"unknown map kind {self.kind!r}")
        if sg.ndim != 1 or tg.ndim != 1 or sg.size < 2 or tg.size < 2:
            raise ValidationError("grids need at least two points")
        if np.any(np.diff(sg) <= 0) or np.any(np.diff(tg) <= 0):
            raise ValidationError("grids must be strictly ascending")
        if vals.shape != (sg.size, tg.size):
            raise ValidationError(f"values shape {vals.shape} does not match grids {(sg.size, tg.size)}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("map values must be finite")
        if self.kind == "efficiency" and (np.any(vals <= 0) or np.any(vals > 1)):
            raise ValidationError("efficiency values must lie in (0, 1]")
        if self.kind != "efficiency" and np.any(vals < 0):
            raise ValidationError("rate values must be >= 0")
        for a in (sg, tg, vals):
            a.setflags(write=False)
        object.__setattr__(self, "speed_grid", sg)
        object.__setattr__(self, "torque_grid", tg)
        object.__setattr__(self, "values", vals)

    def check_hull(self, speed, torque):
        speed = np.asarray(speed, dtype=float)
        torque = np.asarray(torque, dtype=float)
        s0, s1 = self.speed_grid[0], self.speed_grid[-1]
        t0, t1 = self.torque_grid[0], self.torque_grid[-1]
        bad_s = (speed < s0 - GRID_TOL) | (speed > s1 + GRID_TOL) | np.isnan(speed)
        if np.any(bad_s):
            x = float(np.ravel(speed)[np.argmax(np.ravel(bad_s))])
            raise LookupRangeError(f"speed {x:.6g} rad/s outside [{s0:.6g}, {s1:.6g}]", axis="speed")
        bad_t = (torque < t0 - GRID_TOL) | (torque > t1 + GRID_TOL) | np.isnan(torque)
        if np.any(bad_t):
            x = float(np.ravel(torque)[np.argmax(np.ravel(bad_t))])
            raise LookupRangeError(f"torque {x:.6g} N*m outside [{t0:.6g}, {t1:.6g}]", axis="torque")

    def lookup(self, speed, torque):
        """Bilinear interpolation; scalar in, scalar out, arrays in, arrays out."""
        scalar = np.ndim(speed) == 0 and np.ndim(torque) == 0
        self.check_hull(speed, torque)
        s, t = np.broadcast_arrays(np.asarray(speed, dtype=float), np.asarray(torque, dtype=float))
        s = np.clip(s, self.speed_grid[0], self.speed_grid[-1])
        t = np.clip(t, self.torque_grid[0], self.torque_grid[-1])
        out = kernels.bilinear(self.speed_grid, self.torque_grid, self.values, s.ravel(), t.ravel())
        if scalar:
            return float(out[0])
        return out.reshape(s.shape)

    def to_csv(self, sink):
        sink.write("speed_radps,torque_nm,value\n")
        for i, s in enumerate(self.speed_grid):
            for j, t in enumerate(self.torque_grid):
                sink.write(f"{float(s)!r},{float(t)!r},{float(self.values[i, j])!r}\n")

    @classmethod
    def from_csv(cls, source, kind):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != ["speed_radps", "torque_nm", "value"]:
            raise ValidationError("map CSV header must be speed_radps,torque_nm,value")
        data = {}
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                s, t, v = (float(c) for c in row)
            except ValueError:
                raise ValidationError(f"line {lineno}: malformed map row") from None
            data[(s, t)] = v
        speeds = np.array(sorted({k[0] for k in data}))
        torques = np.array(sorted({k[1] for k in data}))
        if len(data) != speeds.size * torques.size:
            raise ValidationError("map CSV does not describe a complete grid")
        vals = np.array([[data[(s, t)] for t in torques] for s in speeds])
        return cls(speeds, torques, vals, kind)


def map_lookup(cmap, speed, torque):
    return cmap.lookup(speed, torque)


# ---------------------------------------------------------------------------
# electric machines


@dataclass(frozen=True)
class LossCoefficients:
    """Per-unit loss family: loss / P_peak = cu*(T/Tpk)^2 + fe*(w/wmax) + windage*(w/wmax)^3 + const."""

    copper: float = 0.05
    iron: float = 0.015
    windage: float = 0.01
    const: float = 0.01

    def loss(self, peak_power, peak_torque, max_speed, speed, torque):
        tn = np.abs(torque) / peak_torque
        wn = np.asarray(speed) / max_speed
        return peak_power * (self.copper * tn ** 2 + self.iron * wn + self.windage * wn ** 3 + self.const)

    def scaled(self, factor):
        return LossCoefficients(self.copper * factor, self.iron * factor, self.windage * factor, self.const * factor)


@dataclass(frozen=True, eq=False)
class MotorSpec:
    name: str
    peak_power: float
    max_speed: float
    base_speed: float
    efficiency_map: ComponentMap
    losses: LossCoefficients = field(default_factory=LossCoefficients)

    def __post_init__(self):
        if not 0 < self.base_speed < self.max_speed:
            raise ValidationError(f"{self.name}: need 0 < base_speed < max_speed")
        if self.peak_power <= 0:
            raise ValidationError(f"{self.name}: peak_power must be positive")

    @property
    def peak_torque(self):
        return self.peak_power / self.base_speed

    def max_torque(self, speed):
        """Vectorised envelope; NaN above max speed."""
        speed = np.asarray(speed, dtype=float)
        with np.errstate(divide="ignore"):
            env = np.where(speed <= self.base_speed, self.peak_torque, self.peak_power / np.maximum(speed, 1e-12))
        return np.where((speed < 0) | (speed > self.max_speed * (1 + 1e-12)), np.nan, env)

    def efficiency(self, speed, torque):
        return self.efficiency_map.lookup(speed, np.abs(torque))

    def electrical_power(self, speed, torque):
        """Terminal power: motoring divides by efficiency, generating multiplies."""
        p_mech = np.asarray(speed) * np.asarray(torque)
        eta = self.efficiency(speed, torque)
        return np.where(p_mech >= 0, p_mech / eta, p_mech * eta)


def motor_max_torque(spec, speed):
    if not 0 <= speed <= spec.max_speed:
        raise LookupRangeError(f"{spec.name}: speed {speed:.6g} rad/s outside [0, {spec.max_speed:.6g}]", axis="speed")
    return float(spec.max_torque(speed))


def _motor_grids(max_speed, peak_torque, n_speed=49, n_torque=41):
    speed = max_speed * np.linspace(0.0, 1.0, n_speed) ** 1.5
    torque = peak_torque * np.linspace(0.0, 1.0, n_torque) ** 2
    return speed, torque


def make_motor(name, peak_power, max_rpm, base_rpm, losses=None):
    losses = losses or LossCoefficients()
    max_speed = max_rpm * RPM
    base_speed = base_rpm * RPM
    peak_torque = peak_power / base_speed
    sg, tg = _motor_grids(max_speed, peak_torque)
    S, T = np.meshgrid(sg, tg, indexing="ij")
    p = S * T
    loss = losses.loss(peak_power, peak_torque, max_speed, S, T)
    with np.errstate(invalid="ignore", divide="ignore"):
        eta = np.where(p > 0, p / (p + loss), 0.0)
    eta = np.clip(eta, ETA_FLOOR, 1.0)
    cmap = ComponentMap(sg, tg, eta, "efficiency")
    return MotorSpec(name, peak_power, max_speed, base_speed, cmap, losses)


# ---------------------------------------------------------------------------
# engine


@dataclass(frozen=True)
class FuelModel:
    """Willans-type fuel rate: (P_e / eta_ind + P_friction) / LHV."""

    eta_peak: float = 0.42
    speed_opt_rpm: float = 1800.0
    speed_width: float = 0.25
    load_opt: float = 0.7
    load_width: float = 0.15
    fmep0_bar: float = 0.5
    fmep1_bar: float = 0.25
    fmep2_bar: float = 0.05
    displacement_l: float = 2.5

    def friction_power(self, speed):
        krpm = np.asarray(speed) / RPM / 1000.0
        fmep = (self.fmep0_bar + self.fmep1_bar * krpm + self.fmep2_bar * krpm ** 2) * 1e5
        return fmep * self.displacement_l * 1e-3 * np.asarray(speed) / (4.0 * math.pi)

    def indicated_efficiency(self, speed, load):
        ws = (np.asarray(speed) / RPM - self.speed_opt_rpm) / self.speed_opt_rpm
        eta = self.eta_peak - self.speed_width * ws ** 2 - self.load_width * (np.asarray(load) - self.load_opt) ** 2
        return np.maximum(eta, 0.12)

    def rate(self, speed, torque, t_ref):
        p = np.asarray(speed) * np.asarray(torque)
        eta = self.indicated_efficiency(speed, np.asarray(torque) / t_ref)
        return (p / eta + self.friction_power(speed)) / DIESEL_LHV


@dataclass(frozen=True)
class EmissionModel:
    """Specific emissions in g/kWh on (relative load, normalised speed) plus an idle floor in g/s.

    ``base + load_slope * load**load_exp + lowload * (1-load)**2``
    ``+ lug * exp(-((1-load)/lug_load_w)**2) * exp(-nspeed/lug_speed_w)``
    ``+ part * exp(-(load/part_load_w)**2) * sigmoid((nspeed-part_speed_c)/part_speed_w)``,
    all scaled by ``1 + speed_slope * nspeed``.  The last term describes light-load
    running at elevated speed, away from the generator operating line.
    """

    base: float
    load_slope: float = 0.0
    load_exp: float = 1.0
    lowload: float = 0.0
    lug: float = 0.0
    lug_load_w: float = 0.15
    lug_speed_w: float = 0.25
    part: float = 0.0
    part_load_w: float = 0.5
    part_speed_c: float = 0.3
    part_speed_w: float = 0.05
    speed_slope: float = 0.0
    idle: float = 0.0

    def specific(self, load, nspeed):
        load = np.clip(load, 0.0, 1.0)
        nspeed = np.clip(nspeed, 0.0, 1.0)
        rise = 1.0 / (1.0 + np.exp(-(nspeed - self.part_speed_c) / self.part_speed_w))
        return (
            self.base
            + self.load_slope * load ** self.load_exp
            + self.lowload * (1.0 - load) ** 2
            + self.lug * np.exp(-(((1.0 - load) / self.lug_load_w) ** 2)) * np.exp(-nspeed / self.lug_speed_w)
            + self.part * np.exp(-((load / self.part_load_w) ** 2)) * rise
        ) * (1.0 + self.speed_slope * nspeed)


DEFAULT_EMISSIONS = {
    "HC": EmissionModel(base=0.02, lowload=0.06, part=1.0, part_speed_w=0.04, idle=0.0004),
    "CO": EmissionModel(base=0.7, lowload=0.5, lug=20.0, lug_load_w=0.07, lug_speed_w=0.12, part=10.0,
                        part_speed_w=0.04, idle=0.004),
    "NOx": EmissionModel(base=1.5, load_slope=6.5, load_exp=1.5, speed_slope=0.2, idle=0.002),
    "PM": EmissionModel(base=0.07, lowload=0.03, lug=0.8, lug_load_w=0.07, lug_speed_w=0.12, part=0.8,
                        part_speed_w=0.04, idle=0.0002),
}


@dataclass(frozen=True, eq=False)
class EngineSpec:
    name: str
    max_power: float
    max_speed: float
    idle_speed: float
    flat_torque: float
    flat_from: float
    idle_torque: float
    fuel_map: ComponentMap
    emission_maps: dict
    rho_f: float = DIESEL_DENSITY

    def torque_envelope(self, speed):
        speed = np.asarray(speed, dtype=float)
        ramp = self.idle_torque + (self.flat_torque - self.idle_torque) * (speed - self.idle_speed) / (self.flat_from - self.idle_speed)
        with np.errstate(divide="ignore"):
            env = np.minimum(np.where(speed < self.flat_from, ramp, self.flat_torque), self.max_power / np.maximum(speed, 1e-12))
        return np.where((speed < self.idle_speed * (1 - 1e-12)) | (speed > self.max_speed * (1 + 1e-12)), np.nan, env)

    def in_envelope(self, speed, torque):
        env = self.torque_envelope(speed)
        return np.isfinite(env) & (np.asarray(torque) >= -1e-9) & (np.asarray(torque) <= env + 1e-9)

    def _require(self, speed, torque):
        if not bool(np.all(self.in_envelope(speed, torque))):
            raise InfeasibleOperatingPoint(f"{self.name}: ({speed} rad/s, {torque} N*m) outside torque envelope")

    def fuel_rate(self, speed, torque):
        self._require(speed, torque)
        return self.fuel_map.lookup(speed, np.clip(torque, 0.0, None))

    def emission_rate(self, speed, torque, species):
        if species not in self.emission_maps:
            raise KeyError(f"unknown species {species!r}; expected one of {SPECIES}")
        self._require(speed, torque)
        return self.emission_maps[species].lookup(speed, np.clip(torque, 0.0, None))

    def bsfc(self, speed, torque):
        """g/kWh; infinite at zero torque."""
        rate = self.fuel_rate(speed, torque)
        p = np.asarray(speed) * np.asarray(torque)
        with np.errstate(divide="ignore"):
            return np.where(p > 0, rate * 3.6e6 / np.where(p > 0, p, 1.0), np.inf)


def engine_fuel_rate(spec, speed, torque):
    return spec.fuel_rate(speed, torque)


def engine_emission_rate(spec, speed, torque, species):
    return spec.emission_rate(speed, torque, species)


def make_engine(name="diesel-2.5L", max_power=88e3, max_rpm=4500.0, idle_rpm=800.0, flat_torque=280.0,
                flat_from_rpm=1200.0, idle_torque=220.0, fuel_model=None, emissions=None,
                n_speed=38, n_torque=29):
    fuel_model = fuel_model or FuelModel()
    emissions = emissions or DEFAULT_EMISSIONS
    max_speed = max_rpm * RPM
    idle_speed = idle_rpm * RPM
    sg = np.linspace(idle_speed, max_speed, n_speed)
    tg = np.linspace(0.0, flat_torque, n_torque)
    S, T = np.meshgrid(sg, tg, indexing="ij")
    fuel = fuel_model.rate(S, T, flat_torque)
    proto = EngineSpec(name, max_power, max_speed, idle_speed, flat_torque, flat_from_rpm * RPM, idle_torque,
                       ComponentMap(sg, tg, fuel, "fuel_rate_g_per_s"), {})
    env = np.nan_to_num(proto.torque_envelope(S), nan=flat_torque)
    load = T / env
    nspeed = (S - idle_speed) / (max_speed - idle_speed)
    p_kw = S * T / 1000.0
    maps = {}
    for sp in SPECIES:
        model = emissions[sp]
        rate = p_kw * model.specific(load, nspeed) / 3600.0 + model.idle
        maps[sp] = ComponentMap(sg, tg, rate, "emission_rate_g_per_s")
    return EngineSpec(name, max_power, max_speed, idle_speed, flat_torque, flat_from_rpm * RPM, idle_torque,
                      proto.fuel_map, maps)


# ---------------------------------------------------------------------------
# engine-generator unit


def _generator_torque_for_power(gen, speed, power, iters=60):
    """Shaft torque delivering ``power`` electrical at ``speed`` (vectorised bisection)."""
    speed = np.asarray(speed, dtype=float)
    lo = np.zeros_like(speed)
    hi = np.nan_to_num(gen.max_torque(speed), nan=0.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        p_el = speed * mid * gen.efficiency(speed, mid)
        under = p_el < power
        lo = np.where(under, mid, lo)
        hi = np.where(under, hi, mid)
    return 0.5 * (lo + hi)


def egu_speed_grid(engine, generator, n=241):
    top = min(engine.max_speed, generator.max_speed)
    return np.linspace(engine.idle_speed, top, n)


def egu_capability(engine, generator, n=241):
    """Largest electrical output of the engine-generator unit."""
    w = egu_speed_grid(engine, generator, n)
    t = np.minimum(engine.torque_envelope(w), generator.max_torque(w))
    return float(np.max(w * t * generator.efficiency(w, t)))


def egu_optimal_point(engine, generator, power, n=241):
    """Minimum-fuel (speed, torque) delivering ``power`` W electrical; lowest speed wins ties."""
    if power <= 0:
        raise ValueError("power must be positive")
    cap = egu_capability(engine, generator, n)
    if power > cap * (1 + 1e-9):
        raise CapabilityError(f"EGU cannot deliver {power:.0f} W (max {cap:.0f} W)")
    w = egu_speed_grid(engine, generator, n)
    t = _generator_torque_for_power(generator, w, power)
    ok = engine.in_envelope(w, t) & (t <= np.nan_to_num(generator.max_torque(w), nan=-1.0) + 1e-9)
    ok &= np.abs(w * t * generator.efficiency(w, t) - power) <= 1e-6 * max(power, 1.0)
    if not np.any(ok):
        raise CapabilityError(f"EGU cannot deliver {power:.0f} W on its speed grid")
    fuel = np.full(w.shape, np.inf)
    fuel[ok] = engine.fuel_map.lookup(w[ok], t[ok])
    k = int(np.argmin(fuel))
    return float(w[k]), float(t[k])


# ---------------------------------------------------------------------------
# battery


@dataclass(frozen=True, eq=False)
class BatterySpec:
    capacity: float
    uoc_table: np.ndarray
    r_dis_table: np.ndarray
    r_chg_table: np.ndarray
    soc_min: float = 0.3
    soc_max: float = 0.9

    def __post_init__(self):
        tabs = [np.array(t, dtype=float) for t in (self.uoc_table, self.r_dis_table, self.r_chg_table)]
        if len({t.size for t in tabs}) != 1 or tabs[0].size < 2:
            raise ValidationError("battery tables must share one uniform SOC grid of >= 2 points")
        if np.any(tabs[0] <= 0) or np.any(tabs[1] <= 0) or np.any(tabs[2] <= 0):
            raise ValidationError("open-circuit voltage and resistances must be positive")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise ValidationError("need 0 <= soc_min < soc_max <= 1")
        if self.capacity <= 0:
            raise ValidationError("capacity must be positive")
        for name, t in zip(("uoc_table", "r_dis_table", "r_chg_table"), tabs):
            t.setflags(write=False)
            object.__setattr__(self, name, t)

    @property
    def soc_grid(self):
        return np.linspace(0.0, 1.0, self.uoc_table.size)

    def u_oc(self, soc):
        return np.interp(soc, self.soc_grid, self.uoc_table)

    def r_int(self, soc, direction):
        tab = {"discharge": self.r_dis_table, "charge": self.r_chg_table}[direction]
        return np.interp(soc, self.soc_grid, tab)

    def dsoc(self, soc, p_bat):
        """Vectorised rate with NaN where the power limit is exceeded."""
        return kernels.dsoc_numpy(soc, p_bat, self.capacity, self.uoc_table, self.r_dis_table, self.r_chg_table)

    def current(self, soc, p_bat):
        return -self.capacity * self.dsoc(soc, p_bat)

    def ocv_energy(self, soc_a, soc_b):
        """capacity * integral of U_oc from soc_b to soc_a (energy released going a -> b), exact for the table."""
        g = self.soc_grid
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (self.uoc_table[1:] + self.uoc_table[:-1]) * np.diff(g))])

        def prim(s):
            s = np.asarray(s, dtype=float)
            i = np.clip(np.searchsorted(g, s, side="right") - 1, 0, g.size - 2)
            ds = s - g[i]
            slope = (self.uoc_table[i + 1] - self.uoc_table[i]) / (g[i + 1] - g[i])
            return cum[i] + self.uoc_table[i] * ds + 0.5 * slope * ds ** 2

        return self.capacity * (prim(soc_a) - prim(soc_b))


def soc_derivative_raw(u_oc, r_bat, capacity, p_bat):
    disc = u_oc * u_oc - 4.0 * p_bat * r_bat
    if disc < 0:
        raise BatteryPowerLimitError(f"battery power {p_bat:.0f} W exceeds the limit {u_oc * u_oc / (4 * r_bat):.0f} W")
    return -(u_oc - math.sqrt(disc)) / (2.0 * capacity * r_bat)


def soc_derivative(bat, soc, p_bat):
    if not 0.0 <= soc <= 1.0:
        raise ValidationError("soc must lie in [0, 1]")
    direction = "discharge" if p_bat >= 0 else "charge"
    return soc_derivative_raw(float(bat.u_oc(soc)), float(bat.r_int(soc, direction)), bat.capacity, p_bat)


def battery_power_smsp(p_m0, eta_m0, eta_c):
    return p_m0 * (eta_m0 * eta_c) ** (-np.sign(p_m0))


def battery_power_dual(p_m1, eta_m1, p_m2, eta_m2, eta_c):
    bus = p_m1 * eta_m1 ** (-np.sign(p_m1)) + p_m2 * eta_m2 ** (-np.sign(p_m2))
    return bus * eta_c ** (-np.sign(bus))


def bus_to_battery(p_bus, eta_c):
    """Converter between the DC bus and the pack, sign-dependent as in the battery-power relations."""
    p_bus = np.asarray(p_bus, dtype=float)
    return np.where(p_bus >= 0, p_bus / eta_c, p_bus * eta_c)


def make_battery(cells=200, cell_voltage=3.4, capacity_ah=180.0, r_dis_mid=0.12, r_chg_mid=0.15,
                 soc_min=0.3, soc_max=0.9, n=101):
    s = np.linspace(0.0, 1.0, n)
    ocv_shape = 0.3 * (s - 0.5) + 0.15 * (np.tanh((s - 0.08) / 0.06) - np.tanh((0.5 - 0.08) / 0.06))
    uoc = cells * (cell_voltage + ocv_shape)
    u_shape = 1.0 + 1.5 * (s - 0.5) ** 2
    return BatterySpec(capacity_ah * 3600.0, uoc, r_dis_mid * u_shape, r_chg_mid * u_shape, soc_min, soc_max)


# ---------------------------------------------------------------------------
# default component set

# fitted by scripts/fit_motor_losses.py (electric CBDC run, mean working-point efficiency)
MOTOR_LOSSES = {
    "motor0": LossCoefficients(0.11189, 0.033567, 0.022378, 0.022378),
    "motor1": LossCoefficients(0.0973655, 0.0292096, 0.0194731, 0.0194731),
    "motor2": LossCoefficients(0.163103, 0.048931, 0.0326207, 0.0326207),
}
GENERATOR_LOSSES = LossCoefficients()


@dataclass(frozen=True, eq=False)
class ComponentSet:
    motor0: MotorSpec
    motor1: MotorSpec
    motor2: MotorSpec
    generator: MotorSpec
    engine: EngineSpec
    battery: BatterySpec
    eta_c: float = 0.95


def default_components(motor_losses=None, generator_losses=None, eta_c=0.95, battery=None, engine=None):
    ml = dict(MOTOR_LOSSES)
    ml.update(motor_losses or {})
    return ComponentSet(
        motor0=make_motor("motor0", 224e3, 4500, 1500, ml["motor0"]),
        motor1=make_motor("motor1", 112e3, 4500, 1500, ml["motor1"]),
        motor2=make_motor("motor2", 112e3, 4500, 1500, ml["motor2"]),
        generator=make_motor("generator", 76e3, 3000, 1000, generator_losses or GENERATOR_LOSSES),
        engine=engine or make_engine(),
        battery=battery or make_battery(),
        eta_c=eta_c,
    )
