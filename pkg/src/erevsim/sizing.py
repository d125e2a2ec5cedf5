"""Motor power and gear-ratio selection plus dynamic-performance verification."""
import math
from dataclasses import dataclass, field

import numpy as np

from . import components as comp
from .errors import SizingInfeasible, ValidationError
from .powertrain import FINAL_DRIVE, KINDS, Architecture
from .vehicle import VehicleParams, load_torque, road_load_force

KMH = 3.6


@dataclass(frozen=True)
class SizingRequirements:
    """Design targets.

    ``v_f`` is calibrated so the acceleration power lands on a 224 kW motor with
    ``t_a = 10 s``.  ``eta_mw`` is the motor-to-wheel efficiency assumed while
    sizing and ``slack`` the tolerated shortfall on the grade constraint before
    rounding ratios up to one decimal.
    """

    t_a: float = 10.0
    v_f: float = 14.9688
    i_m: float = 3.0
    grade_max: float = 0.5
    v_at_grade: float = 2.778
    v_max_target: float = 22.22
    gear_count: int = 4
    eta_mw: float = 0.95
    slack: float = 0.02
    i0: float = FINAL_DRIVE
    motor_max_rpm: float = 4500.0

    def __post_init__(self):
        for name in ("t_a", "v_f", "i_m", "grade_max", "v_at_grade", "v_max_target", "eta_mw", "i0", "motor_max_rpm"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if not self.v_at_grade < self.v_f < self.v_max_target:
            raise ValidationError("need v_at_grade < v_f < v_max_target")
        if self.gear_count != 4:
            raise ValidationError("only four-speed gearboxes are supported")
        if not 0 < self.eta_mw <= 1 or not 0 <= self.slack < 1:
            raise ValidationError("need 0 < eta_mw <= 1 and 0 <= slack < 1")

    @property
    def v_b(self):
        return self.v_f / self.i_m


def motor_power_acceleration(req, vehicle):
    """Peak power to accelerate from rest to ``v_f`` in ``t_a`` with base speed ``v_f / i_m``."""
    p = vehicle
    inertia = p.delta * p.M / (2.0 * req.t_a) * (req.v_f ** 2 + req.v_b ** 2)
    rolling = 2.0 / 3.0 * p.M * p.g * p.f_r * req.v_f
    aero = 0.2 * p.rho_a * p.C_d * p.A_f * req.v_f ** 3
    return inertia + rolling + aero


def motor_power_grade(req, vehicle):
    """Power to hold ``v_at_grade`` on the maximum grade."""
    return float(road_load_force(req.v_at_grade, req.grade_max, vehicle)) * req.v_at_grade


@dataclass(frozen=True)
class MotorPowers:
    P_m0: float
    P_m1: float
    P_m2: float
    P_accel: float
    P_grade: float


def select_motor_power(req, vehicle):
    """Single motor takes the larger requirement; each dual motor gets half of it."""
    pa = motor_power_acceleration(req, vehicle)
    pg = motor_power_grade(req, vehicle)
    p0 = max(pa, pg)
    return MotorPowers(p0, p0 / 2.0, p0 / 2.0, pa, pg)


def _ceil1(x):
    return math.ceil(round(x * 10.0, 9)) / 10.0


def _floor1(x):
    return math.floor(round(x * 10.0, 9)) / 10.0


def geometric_ratios(i1, i4, n=4):
    """Intermediate ratios on a geometric progression, rounded to one decimal."""
    q = (i4 / i1) ** (1.0 / (n - 1))
    return tuple([i1] + [round(i1 * q ** k, 1) for k in range(1, n - 1)] + [i4])


@dataclass(frozen=True)
class GearSelection:
    kind: str
    i0: float
    ratios: tuple
    grade_torque: float  # wheel torque demanded at the grade design point, N*m
    grade_capability: float  # sized wheel torque at that point (sizing efficiency)
    top_torque: float  # road-load wheel torque at the top-speed design point
    top_capability: float


def select_gear_ratios(req, vehicle, motor, kind):
    """Ratios for ``kind``: ``motor`` is motor 0 for the single-motor drivetrain and
    one of the two equal half-size motors otherwise.

    4th gear puts the motor at its maximum speed at the top-speed target (rounded
    down so the target stays reachable).  1st gear is the smallest one-decimal value
    meeting the grade requirement; on the dual drivetrains both motors pull in 1st
    and 2nd gear.  2nd and 3rd follow a geometric progression.
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown architecture {kind!r}")
    i0 = req.i0
    w_max = req.motor_max_rpm * comp.RPM
    i4 = _floor1(w_max * vehicle.r_t / req.v_max_target / i0)
    w_grade = req.v_at_grade / vehicle.r_t
    T_need = float(load_torque(req.v_at_grade, req.grade_max, vehicle))
    target = (1.0 - req.slack) * T_need

    def capability(ratios):
        i1, i2 = ratios[0], ratios[1]
        t1 = float(motor.max_torque(w_grade * i0 * i1))
        if kind == "SMSP":
            return t1 * i1 * i0 * req.eta_mw
        t2 = float(motor.max_torque(w_grade * i0 * i2))
        return (t1 * i1 + t2 * i2) * i0 * req.eta_mw

    i1 = _ceil1(i4 + 0.1)
    ratios = None
    while i1 < 50.0:
        cand = geometric_ratios(i1, i4)
        if all(a > b for a, b in zip(cand, cand[1:])) and np.isfinite(capability(cand)) and capability(cand) >= target:
            ratios = cand
            break
        i1 = round(i1 + 0.1, 1)
    if ratios is None:
        raise SizingInfeasible("no first-gear ratio meets the grade requirement", deficit=T_need)
    # top-speed torque balance: motor 0, or motor 2 alone, in 4th gear
    w_top = w_max
    v_top = w_top * vehicle.r_t / (i4 * i0)
    T_top = float(load_torque(v_top, 0.0, vehicle))
    cap_top = float(motor.max_torque(w_top)) * i4 * i0 * req.eta_mw
    if cap_top < T_top:
        raise SizingInfeasible("top-speed torque balance fails in 4th gear", deficit=T_top - cap_top)
    return GearSelection(kind, i0, ratios, T_need, capability(ratios), T_top, cap_top)


# ---------------------------------------------------------------------------
# verification


def max_wheel_torque(arch, v, with_engine=True):
    """Largest driving wheel torque available at speed ``v`` (motors at full torque,
    the engine added on the even shaft of the parallel drivetrain)."""
    c = arch.components
    eta = arch.vehicle.eta_t
    w_w = v / arch.vehicle.r_t

    def shaft(motor, gears, engine=False):
        best = 0.0
        for g in gears:
            w = w_w * arch.total_ratio(g)
            if w > motor.max_speed * (1 + 1e-12):
                continue
            t = float(motor.max_torque(w))
            if engine and c.engine.idle_speed <= w <= c.engine.max_speed:
                t += float(c.engine.torque_envelope(w))
            best = max(best, t * arch.total_ratio(g))
        return best

    if not arch.dual:
        return shaft(c.motor0, (1, 2, 3, 4)) * eta
    engine = with_engine and arch.has_clutch
    return (shaft(c.motor1, (1, 3)) + shaft(c.motor2, (2, 4), engine)) * eta


def kinematic_top_speed(arch):
    c = arch.components
    motor = c.motor0 if not arch.dual else c.motor2
    return motor.max_speed * arch.vehicle.r_t / arch.total_ratio(4)


@dataclass(frozen=True)
class Performance:
    kind: str
    v_max_kmh: float
    grade_max_pct: float
    v_10s_kmh: float


def _bisect(f, lo, hi, tol):
    """Largest x in [lo, hi] with f(x) true, assuming f(lo) true and monotone."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid):
            lo = mid
        else:
            hi = mid
    return lo


def verify_performance(arch, dt=0.01, grade_tol=1e-4, grade_speed=2.778):
    """Top speed, maximum grade at ``grade_speed`` and speed reached after 10 s."""
    p = arch.vehicle

    def climbs(v, grade):
        return max_wheel_torque(arch, v) >= float(load_torque(v, grade, p))

    v_kin = kinematic_top_speed(arch)
    if climbs(v_kin, 0.0):
        v_max = v_kin
    else:
        v_max = _bisect(lambda v: climbs(v, 0.0), 0.0, v_kin, 1e-4)
    grade = _bisect(lambda g: climbs(grade_speed, g), 0.0, 5.0, grade_tol) if climbs(grade_speed, 0.0) else 0.0

    v = 0.0
    for _ in range(int(round(10.0 / dt))):
        force = max_wheel_torque(arch, v) / p.r_t - float(road_load_force(v, 0.0, p))
        v = min(max(v + force / (p.delta * p.M) * dt, 0.0), v_kin)
    return Performance(arch.kind, v_max * KMH, grade * 100.0, v * KMH)


# ---------------------------------------------------------------------------
# full procedure


@dataclass(frozen=True)
class SizingReport:
    requirements: SizingRequirements
    powers: MotorPowers
    gears: dict  # kind -> GearSelection
    performance: dict  # kind -> Performance
    engine_power: float = 88e3
    generator_power: float = 76e3
    kinds: tuple = field(default=KINDS)

    def to_text(self):
        pw = self.powers
        lines = [
            f"motor power: acceleration {pw.P_accel / 1e3:.1f} kW, grade {pw.P_grade / 1e3:.1f} kW",
            f"  P_m0 {pw.P_m0 / 1e3:.1f} kW   P_m1 {pw.P_m1 / 1e3:.1f} kW   P_m2 {pw.P_m2 / 1e3:.1f} kW",
            f"  engine {self.engine_power / 1e3:.1f} kW   generator {self.generator_power / 1e3:.1f} kW",
            "",
            f"{'config':<6} {'i0':>5} {'i1':>5} {'i2':>5} {'i3':>5} {'i4':>5} {'v_max[km/h]':>12} {'grade[%]':>9} {'v_10s[km/h]':>12}",
        ]
        for k in self.kinds:
            g, pf = self.gears[k], self.performance[k]
            r = g.ratios
            lines.append(f"{k:<6} {g.i0:>5.1f} {r[0]:>5.1f} {r[1]:>5.1f} {r[2]:>5.1f} {r[3]:>5.1f} "
                         f"{pf.v_max_kmh:>12.1f} {pf.grade_max_pct:>9.1f} {pf.v_10s_kmh:>12.1f}")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        out = ["config,P_m0_kW,P_m1_kW,P_m2_kW,i0,i1,i2,i3,i4,v_max_kmh,grade_max_pct,v_10s_kmh"]
        pw = self.powers
        for k in self.kinds:
            g, pf = self.gears[k], self.performance[k]
            powers = (pw.P_m0, 0.0, 0.0) if k == "SMSP" else (0.0, pw.P_m1, pw.P_m2)
            out.append(",".join([k] + [f"{x / 1e3:.3f}" for x in powers] + [f"{g.i0:.1f}"]
                                + [f"{r:.1f}" for r in g.ratios]
                                + [f"{pf.v_max_kmh:.3f}", f"{pf.grade_max_pct:.3f}", f"{pf.v_10s_kmh:.3f}"]))
        return "\n".join(out) + "\n"


def size_all(req=None, vehicle=None, kinds=KINDS, motor_losses=None):
    """Run motor sizing, ratio selection and verification for every configuration."""
    req = req or SizingRequirements()
    vehicle = vehicle or VehicleParams()
    powers = select_motor_power(req, vehicle)
    base_rpm = req.motor_max_rpm / req.i_m
    ml = dict(comp.MOTOR_LOSSES)
    ml.update(motor_losses or {})
    motors = {
        "motor0": comp.make_motor("motor0", powers.P_m0, req.motor_max_rpm, base_rpm, ml["motor0"]),
        "motor1": comp.make_motor("motor1", powers.P_m1, req.motor_max_rpm, base_rpm, ml["motor1"]),
        "motor2": comp.make_motor("motor2", powers.P_m2, req.motor_max_rpm, base_rpm, ml["motor2"]),
    }
    defaults = comp.default_components()
    components = comp.ComponentSet(motors["motor0"], motors["motor1"], motors["motor2"], defaults.generator,
                                   defaults.engine, defaults.battery, defaults.eta_c)
    gears, perf = {}, {}
    for k in kinds:
        motor = motors["motor0"] if k == "SMSP" else motors["motor2"]
        gears[k] = select_gear_ratios(req, vehicle, motor, k)
        arch = Architecture(k, gears[k].ratios, gears[k].i0, components, vehicle)
        perf[k] = verify_performance(arch)
    return SizingReport(req, powers, gears, perf, defaults.engine.max_power, defaults.generator.peak_power, tuple(kinds))
