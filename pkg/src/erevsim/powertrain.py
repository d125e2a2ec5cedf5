"""Architectures, operating modes, driveline kinematics and torque allocation.

Wheel torque convention: a shaft torque ``tau`` through total ratio ``r`` reaches
the wheel as ``tau * r * eta_t`` when driving and ``tau * r / eta_t`` when
regenerating, so the driveline always loses energy.  Shaft torques are summed
before the efficiency is applied (the DMPP even shaft carries motor 2 and the
engine together).
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import components as comp
from .errors import CapabilityError, ConsistencyError, InfeasibleModeError, ValidationError
from .vehicle import VehicleParams, is_emergency, required_wheel_torque, split_braking_array

KINDS = ("SMSP", "DMSP", "DMPP")
DEFAULT_RATIOS = {
    "SMSP": (5.0, 3.8, 2.8, 2.1),
    "DMSP": (5.9, 4.2, 3.0, 2.1),
    "DMPP": (5.9, 4.2, 3.0, 2.1),
}
FINAL_DRIVE = 5.2

MODE_NAMES = {
    "SMSP": ("E-drive", "E-regen", "E-idle", "S-drive", "S-regen", "S-idle"),
    "DMSP": ("E-m1", "E-m2", "E-m1m2", "S-m1", "S-m2", "S-m1m2"),
    "DMPP": ("E-m1", "E-m2", "E-m1m2", "engine", "series", "P-m1", "P-m2", "P-m1m2"),
}

# (odd, even) engagements of the dual-motor drivetrain, lower gears first for tie-breaks;
# the single-motor drivetrain uses (gear, 0).
DUAL_ENGAGEMENTS = ((1, 0), (0, 2), (1, 2), (3, 0), (3, 2), (0, 4), (1, 4), (3, 4))
SMSP_ENGAGEMENTS = ((1, 0), (2, 0), (3, 0), (4, 0))
SPECIES = comp.SPECIES


@dataclass(frozen=True)
class Mode:
    """Operating mode with its gear engagement.

    ``gear`` is the motor-0 gear of the single-motor drivetrain; ``odd`` and
    ``even`` are the engaged gears of motor 1 and motor 2 (0 = disengaged).
    """

    name: str
    engine_on: bool = False
    clutch_engaged: bool = False
    gear: int = 0
    odd: int = 0
    even: int = 0


def _dual_name_ok(name, odd, even):
    suffix = name.split("-")[-1]
    return {"m1": odd != 0 and even == 0, "m2": odd == 0 and even != 0, "m1m2": odd != 0 and even != 0}[suffix]


def check_mode(kind, mode):
    """Raise :class:`ValidationError` unless ``mode`` is a legal row of the mode table."""
    if mode.name not in MODE_NAMES[kind]:
        raise ValidationError(f"{mode.name!r} is not a {kind} mode")
    bad = None
    if kind == "SMSP":
        if mode.gear not in (1, 2, 3, 4) or mode.odd or mode.even or mode.clutch_engaged:
            bad = "single-motor modes engage exactly one of gears 1-4"
        elif mode.engine_on != mode.name.startswith("S-"):
            bad = "engine state does not match mode"
        return _raise_if(bad, mode)
    if mode.gear or mode.odd not in (0, 1, 3) or mode.even not in (0, 2, 4):
        return _raise_if("motor 1 owns gears 1/3, motor 2 owns gears 2/4", mode)
    if kind == "DMSP" or mode.name.startswith("E-"):
        if mode.clutch_engaged:
            bad = "clutch must be open"
        elif mode.engine_on != mode.name.startswith("S-"):
            bad = "engine state does not match mode"
        elif not _dual_name_ok(mode.name, mode.odd, mode.even):
            bad = "gear engagement does not match mode"
        return _raise_if(bad, mode)
    if not (mode.engine_on and mode.clutch_engaged):
        bad = "engine modes run with the clutch engaged"
    elif mode.name == "engine" and not (mode.even and not mode.odd):
        bad = "engine mode drives through an even gear alone"
    elif mode.name == "series" and not (mode.odd and not mode.even):
        bad = "series mode opens the even synchronizer and drives motor 1 in an odd gear"
    elif mode.name == "P-m2" and not (mode.even and not mode.odd):
        bad = "P-m2 engages an even gear only"
    elif mode.name in ("P-m1", "P-m1m2") and not (mode.even and mode.odd):
        bad = "parallel modes with motor 1 engage an odd and an even gear"
    return _raise_if(bad, mode)


def _raise_if(msg, mode):
    if msg:
        raise ValidationError(f"{mode}: {msg}")


@dataclass(frozen=True, eq=False)
class Architecture:
    kind: str
    ratios: tuple
    i0: float
    components: comp.ComponentSet
    vehicle: VehicleParams = field(default_factory=VehicleParams)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown architecture {self.kind!r}")
        r = tuple(float(x) for x in self.ratios)
        if len(r) != 4 or not all(a > b for a, b in zip(r, r[1:])) or r[-1] <= 0:
            raise ValidationError("need four strictly decreasing positive gear ratios")
        if not self.i0 > 0:
            raise ValidationError("final drive ratio must be positive")
        object.__setattr__(self, "ratios", r)

    @property
    def dual(self):
        return self.kind != "SMSP"

    @property
    def has_generator(self):
        return self.kind != "DMPP"

    @property
    def has_clutch(self):
        return self.kind == "DMPP"

    @property
    def engagements(self):
        return DUAL_ENGAGEMENTS if self.dual else SMSP_ENGAGEMENTS

    @property
    def egu_generator(self):
        """Machine converting engine power to electricity (motor 2 in the parallel layout)."""
        return self.components.generator if self.has_generator else self.components.motor2

    def ratio(self, gear):
        return 0.0 if gear == 0 else self.ratios[gear - 1]

    def total_ratio(self, gear):
        return self.ratio(gear) * self.i0

    def mode_names(self):
        return MODE_NAMES[self.kind]

    def all_modes(self):
        out = []
        for name in MODE_NAMES[self.kind]:
            if self.kind == "SMSP":
                for g in (1, 2, 3, 4):
                    out.append(Mode(name, engine_on=name.startswith("S-"), gear=g))
                continue
            engine = name.startswith("S-") or not name.startswith("E-")
            clutch = self.kind == "DMPP" and engine
            for odd in (0, 1, 3):
                for even in (0, 2, 4):
                    m = Mode(name, engine_on=engine, clutch_engaged=clutch, odd=odd, even=even)
                    try:
                        check_mode(self.kind, m)
                    except ValidationError:
                        continue
                    out.append(m)
        return tuple(out)


def default_architecture(kind, components=None, vehicle=None, ratios=None, i0=FINAL_DRIVE):
    kind = kind.upper()
    if kind not in KINDS:
        raise ValidationError(f"unknown architecture {kind!r}; choose from {KINDS}")
    return Architecture(kind, tuple(ratios or DEFAULT_RATIOS[kind]), i0,
                        components or comp.default_components(), vehicle or VehicleParams())


@dataclass(frozen=True)
class ControlDecision:
    """Applied control.  ``T_bF`` is the friction-brake wheel torque magnitude.

    ``w_e`` is the free engine speed of series operation; in parallel
    operation it follows from the kinematics and may be left ``None``.
    """

    mode: Mode
    T_m0: float = 0.0
    T_m1: float = 0.0
    T_m2: float = 0.0
    T_e: float = 0.0
    w_e: float = None
    T_bF: float = 0.0

    def __post_init__(self):
        if self.T_bF < 0:
            raise ValidationError("T_bF is a magnitude and must be >= 0")


def component_speeds(arch, v, mode):
    """Driveline speeds in rad/s; a series-operated engine speed is free and returned as ``None``."""
    if v < 0:
        raise ValidationError("v must be >= 0")
    check_mode(arch.kind, mode)
    w_w = v / arch.vehicle.r_t
    c = arch.components
    out = {"w_w": w_w}
    limits = []
    if arch.kind == "SMSP":
        out["w_m0"] = w_w * arch.total_ratio(mode.gear)
        limits.append(("motor0", out["w_m0"], c.motor0.max_speed))
        out["w_e"] = None if mode.engine_on else 0.0
    else:
        out["w_m1"] = w_w * arch.total_ratio(mode.odd)
        limits.append(("motor1", out["w_m1"], c.motor1.max_speed))
        if arch.kind == "DMPP" and mode.name == "series":
            out["w_m2"] = None
            out["w_e"] = None
        else:
            out["w_m2"] = w_w * arch.total_ratio(mode.even)
            limits.append(("motor2", out["w_m2"], c.motor2.max_speed))
            if arch.kind == "DMPP" and mode.clutch_engaged:
                out["w_e"] = out["w_m2"]
                limits.append(("engine", out["w_e"], c.engine.max_speed))
            else:
                out["w_e"] = None if mode.engine_on else 0.0
    for name, w, wmax in limits:
        if w > wmax * (1 + 1e-9):
            raise InfeasibleModeError(f"{name} speed {w:.1f} rad/s exceeds {wmax:.1f} rad/s in {mode.name}")
    return out


def _to_wheel(tau, r, eta_t):
    return tau * r * eta_t ** float(np.sign(tau))


def wheel_torque(arch, decision, mode=None):
    mode = mode or decision.mode
    check_mode(arch.kind, mode)
    eta = arch.vehicle.eta_t
    d = decision
    if arch.kind == "SMSP":
        if d.T_m1 or d.T_m2:
            raise ConsistencyError("single-motor drivetrain has no motor 1/2")
        tw = _to_wheel(d.T_m0, arch.total_ratio(mode.gear), eta)
        return tw - d.T_bF
    if d.T_m0:
        raise ConsistencyError("dual-motor drivetrain has no motor 0")
    if mode.odd == 0 and d.T_m1:
        raise ConsistencyError("torque on motor 1 with the odd path disengaged")
    tw = _to_wheel(d.T_m1, arch.total_ratio(mode.odd), eta)
    if arch.kind == "DMPP":
        if not mode.engine_on and d.T_e:
            raise ConsistencyError("engine torque with the engine off")
        if mode.name == "series":
            if not math.isclose(d.T_m2, -d.T_e, rel_tol=1e-9, abs_tol=1e-9):
                raise ConsistencyError("series mode: motor 2 must absorb the engine torque")
            return tw - d.T_bF
        if mode.name == "engine" and (d.T_m1 or d.T_m2):
            raise ConsistencyError("engine mode carries no motor torque")
        if mode.name == "P-m1" and d.T_m2:
            raise ConsistencyError("P-m1 keeps motor 2 unpowered")
        tau_even = d.T_m2 + (d.T_e if mode.clutch_engaged else 0.0)
    else:
        tau_even = d.T_m2
    if mode.even == 0 and tau_even:
        raise ConsistencyError("torque on the even path with it disengaged")
    tw += _to_wheel(tau_even, arch.total_ratio(mode.even), eta)
    return tw - d.T_bF


# ---------------------------------------------------------------------------
# capability screens


def _motor_cap(motor, w):
    t = motor.max_torque(w)
    return np.where(np.isfinite(t), t, -np.inf)


def feasible_modes(arch, v, T_w_demand):
    """Modes whose speed limits admit ``v`` and whose envelope covers the demand.

    Braking demands are always coverable (friction brakes), so every kinematically
    admissible mode with a regenerating path or pure friction braking qualifies.
    """
    c = arch.components
    eta = arch.vehicle.eta_t
    w_w = v / arch.vehicle.r_t
    out = set()
    for mode in arch.all_modes():
        try:
            sp = component_speeds(arch, v, mode)
        except InfeasibleModeError:
            continue
        cap = 0.0
        if arch.kind == "SMSP":
            cap = float(_motor_cap(c.motor0, sp["w_m0"])) * arch.total_ratio(mode.gear) * eta
            if mode.name.endswith("drive") and T_w_demand < 0:
                continue
            if not mode.name.endswith("drive") and T_w_demand > 0:
                continue
        else:
            if mode.odd and mode.name != "engine":
                cap += float(_motor_cap(c.motor1, sp["w_m1"])) * arch.total_ratio(mode.odd) * eta
            if mode.even and mode.name not in ("engine", "P-m1"):
                cap += float(_motor_cap(c.motor2, sp["w_m2"])) * arch.total_ratio(mode.even) * eta
            if mode.clutch_engaged and mode.even:
                w_e = w_w * arch.total_ratio(mode.even)
                env = float(c.engine.torque_envelope(w_e))
                if not np.isfinite(env):
                    continue
                cap += env * arch.total_ratio(mode.even) * eta
                if mode.name == "engine" and T_w_demand <= 0:
                    continue
        if T_w_demand > 0 and cap < T_w_demand:
            continue
        out.add(mode)
    return out


# ---------------------------------------------------------------------------
# electric torque allocation (vectorised over operating points)


def _shaft_torque(W, r, eta_t):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(W >= 0, W / (r * eta_t), W * eta_t / r)
    return np.where(r > 0, t, 0.0)


def motor_electric_power(motor, w, T):
    """Terminal power, +inf where (w, T) is outside the envelope."""
    w = np.asarray(w, dtype=float)
    T = np.asarray(T, dtype=float)
    tmax = motor.max_torque(w)
    ok = np.isfinite(tmax) & (np.abs(T) <= np.nan_to_num(tmax, nan=0.0) * (1 + 1e-9) + 1e-9)
    wc = np.clip(w, 0.0, motor.max_speed)
    tc = np.where(ok, np.minimum(np.abs(T), motor.peak_torque), 0.0)
    eta = motor.efficiency_map.lookup(wc, tc)
    pm = wc * np.where(ok, T, 0.0)
    pe = np.where(pm >= 0, pm / eta, pm * eta)
    return np.where(ok, pe, np.inf), eta


class _DualEval:
    """Bus power of a dual-motor engagement as a function of the odd-shaft wheel share."""

    def __init__(self, arch, w_w, Tw, odd, even, T_eng=0.0):
        self.m1 = arch.components.motor1
        self.m2 = arch.components.motor2
        self.eta = arch.vehicle.eta_t
        self.r_o = np.broadcast_to(np.asarray(arch.total_ratio(odd) if np.isscalar(odd) else odd, float), np.shape(Tw))
        self.r_e = np.broadcast_to(np.asarray(arch.total_ratio(even) if np.isscalar(even) else even, float), np.shape(Tw))
        self.w1 = w_w * self.r_o
        self.w2 = w_w * self.r_e
        self.Tw = Tw
        self.T_eng = T_eng

    def torques(self, f):
        W_o = f * self.Tw
        T1 = _shaft_torque(W_o, self.r_o, self.eta)
        T2 = _shaft_torque(self.Tw - W_o, self.r_e, self.eta) - self.T_eng
        return T1, T2

    def __call__(self, f):
        T1, T2 = self.torques(f)
        p1, _ = motor_electric_power(self.m1, self.w1, T1)
        p2, _ = motor_electric_power(self.m2, self.w2, T2)
        # a disengaged path must carry no wheel torque
        bad = ((self.r_o == 0) & (f * self.Tw != 0)) | ((self.r_e == 0) & ((1 - f) * self.Tw != 0))
        return np.where(bad, np.inf, p1 + p2)


def _split_search(ev, levels=21, tol=1e-3):
    """Uniform scan of the split fraction refined by golden-section search (vectorised)."""
    grid = np.linspace(0.0, 1.0, levels)
    n = np.shape(ev.Tw)[0]
    vals = np.stack([ev(np.full(n, f)) for f in grid], axis=1)
    k = np.argmin(vals, axis=1)
    best_f = grid[k]
    best_v = vals[np.arange(n), k]
    a = grid[np.maximum(k - 1, 0)]
    b = grid[np.minimum(k + 1, levels - 1)]
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    width = float(np.max(b - a)) if n else 0.0
    iters = max(0, math.ceil(math.log(tol / width) / math.log(inv))) if width > tol else 0
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = ev(c), ev(d)
    for _ in range(iters):
        left = fc <= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        c, d = np.where(left, b - inv * (b - a), d), np.where(left, c, a + inv * (b - a))
        fx = ev(np.where(left, c, d))
        fc, fd = np.where(left, fx, fd), np.where(left, fc, fx)
    mid = 0.5 * (a + b)
    fm = ev(mid)
    better = fm < best_v
    return np.where(better, mid, best_f), np.where(better, fm, best_v)


@dataclass
class ElectricOptions:
    """Per-engagement electric allocation for arrays of operating points."""

    p_bus: np.ndarray  # (n, E), +inf infeasible
    T_a: np.ndarray  # motor 0 or motor 1 torque (n, E)
    T_b: np.ndarray  # motor 2 torque (n, E), zero for the single-motor drivetrain
    split: np.ndarray  # odd-shaft wheel share (n, E)


def electric_options(arch, v, T_w, levels=21, tol=1e-3):
    """Best battery-side bus power of every gear engagement at each (v, T_w)."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    T_w = np.atleast_1d(np.asarray(T_w, dtype=float))
    w_w = v / arch.vehicle.r_t
    eta = arch.vehicle.eta_t
    engs = arch.engagements
    n, E = v.size, len(engs)
    p_bus = np.full((n, E), np.inf)
    T_a = np.zeros((n, E))
    T_b = np.zeros((n, E))
    split = np.zeros((n, E))
    for e, (g1, g2) in enumerate(engs):
        if not arch.dual:
            r = arch.total_ratio(g1)
            t = _shaft_torque(T_w, r, eta)
            p, _ = motor_electric_power(arch.components.motor0, w_w * r, t)
            p_bus[:, e], T_a[:, e], split[:, e] = p, t, 1.0
            continue
        ev = _DualEval(arch, w_w, T_w, g1, g2)
        if g1 and g2:
            f, p = _split_search(ev, levels, tol)
        else:
            f = np.full(n, 1.0 if g1 else 0.0)
            p = ev(f)
        t1, t2 = ev.torques(f)
        p_bus[:, e], T_a[:, e], T_b[:, e], split[:, e] = p, t1, t2, f
    return ElectricOptions(p_bus, T_a, T_b, split)


def optimal_torque_split(arch, v, T_w, gears, T_e=0.0, levels=21, tol=1e-3):
    """Motor torques (T_m1, T_m2) minimising bus power at engaged ``gears = (odd, even)``."""
    if not arch.dual:
        raise ValidationError("torque split needs a dual-motor architecture")
    odd, even = gears
    w_w = np.array([v / arch.vehicle.r_t])
    ev = _DualEval(arch, w_w, np.array([float(T_w)]), odd, even, T_e)
    if odd and even:
        f, p = _split_search(ev, levels, tol)
    else:
        f = np.array([1.0 if odd else 0.0])
        p = ev(f)
    if not np.isfinite(p[0]):
        raise CapabilityError(f"demand {T_w:.0f} N*m infeasible at gears {gears} and {v:.2f} m/s")
    t1, t2 = ev.torques(f)
    return float(t1[0]), float(t2[0])


# ---------------------------------------------------------------------------
# optimal gear map


@dataclass(frozen=True, eq=False)
class GearMap:
    kind: str
    v_grid: np.ndarray
    T_grid: np.ndarray
    choice: np.ndarray  # index into engagements, -1 infeasible
    p_bat: np.ndarray
    split: np.ndarray
    engagements: tuple

    def gear_index(self):
        """Highest engaged gear per grid point (0 where infeasible)."""
        top = np.array([max(e) for e in self.engagements])
        return np.where(self.choice >= 0, top[np.maximum(self.choice, 0)], 0)

    def lookup(self, v, T_w):
        i = int(np.argmin(np.abs(self.v_grid - v)))
        j = int(np.argmin(np.abs(self.T_grid - T_w)))
        c = int(self.choice[i, j])
        return (None if c < 0 else self.engagements[c]), float(self.split[i, j])

    def to_csv(self, sink):
        sink.write("v_mps,T_w_nm,odd_or_gear,even,split,p_bat_w\n")
        for i, v in enumerate(self.v_grid):
            for j, t in enumerate(self.T_grid):
                c = int(self.choice[i, j])
                g1, g2 = self.engagements[c] if c >= 0 else (0, 0)
                sink.write(f"{float(v)!r},{float(t)!r},{g1},{g2},{float(self.split[i, j])!r},{float(self.p_bat[i, j])!r}\n")


def optimal_gear_map(arch, vehicle=None, v_grid=None, T_grid=None, levels=21, tol=1e-3):
    """Exhaustive engine-off engagement choice minimising battery power on a (v, T_w) grid."""
    if vehicle is not None and vehicle != arch.vehicle:
        arch = Architecture(arch.kind, arch.ratios, arch.i0, arch.components, vehicle)
    v_grid = np.linspace(0.0, 22.5, 46) if v_grid is None else np.asarray(v_grid, dtype=float)
    T_grid = np.linspace(-15000.0, 35000.0, 51) if T_grid is None else np.asarray(T_grid, dtype=float)
    V, T = np.meshgrid(v_grid, T_grid, indexing="ij")
    opts = electric_options(arch, V.ravel(), T.ravel(), levels, tol)
    p_bat = comp.bus_to_battery(opts.p_bus, arch.components.eta_c)
    p_bat = np.where(np.isfinite(opts.p_bus), p_bat, np.inf)
    choice = np.argmin(p_bat, axis=1)
    best = p_bat[np.arange(choice.size), choice]
    choice = np.where(np.isfinite(best), choice, -1)
    split = opts.split[np.arange(choice.size), np.maximum(choice, 0)]
    shape = V.shape
    return GearMap(arch.kind, v_grid, T_grid, choice.reshape(shape), best.reshape(shape),
                   split.reshape(shape), arch.engagements)


# ---------------------------------------------------------------------------
# engine-generator operating table


@dataclass(frozen=True, eq=False)
class EguTable:
    """Discrete engine-on states of a series range extender; row 0 is idling."""

    p_gen: np.ndarray
    w_e: np.ndarray
    T_e: np.ndarray
    fuel: np.ndarray  # g/s
    emissions: np.ndarray  # (species, levels) g/s


def egu_table(arch, levels=21):
    eng = arch.components.engine
    gen = arch.egu_generator
    cap = comp.egu_capability(eng, gen)
    p = np.linspace(0.0, min(cap, eng.max_power), levels)
    w = np.empty(levels)
    t = np.empty(levels)
    w[0], t[0] = eng.idle_speed, 0.0
    for k in range(1, levels):
        w[k], t[k] = comp.egu_optimal_point(eng, gen, p[k])
    fuel = eng.fuel_rate(w, t)
    em = np.stack([eng.emission_rate(w, t, sp) for sp in SPECIES])
    return EguTable(p, w, t, fuel, em)


# ---------------------------------------------------------------------------
# per-step control candidates for the supervisory optimiser


@dataclass(frozen=True)
class ControlGrid:
    engine_levels: int = 21
    parallel_levels: int = 21
    split_levels: int = 21
    split_tol: float = 1e-3
    electric_options: int = 3
    series_traction_options: int = 2

    def __post_init__(self):
        for name in ("engine_levels", "parallel_levels", "split_levels"):
            if getattr(self, name) < 2:
                raise ValidationError(f"{name} must be >= 2")
        if self.electric_options < 1 or self.series_traction_options < 1:
            raise ValidationError("option counts must be >= 1")
        if not self.split_tol > 0:
            raise ValidationError("split_tol must be positive")


CANDIDATE_FIELDS = ("p_bat", "fuel", "mode", "gear", "odd", "even", "T_m0", "T_m1", "T_m2",
                    "w_m0", "w_m1", "w_m2", "T_e", "w_e", "T_g", "w_g", "P_gen", "T_bF", "engine_on")


@dataclass
class CandidateSet:
    """Control candidates per cycle step, shape (steps, C); invalid slots carry ``valid=False``."""

    arch: Architecture
    T_w: np.ndarray
    v: np.ndarray
    valid: np.ndarray
    emissions: np.ndarray  # (species, steps, C) grams per step
    cols: dict

    @property
    def n_steps(self):
        return self.valid.shape[0]

    @property
    def width(self):
        return self.valid.shape[1]

    def __getattr__(self, name):
        cols = self.__dict__.get("cols")
        if cols is not None and name in cols:
            return cols[name]
        raise AttributeError(name)

    def switch_state(self):
        """Component state features (S_e, T_e, S_m, T_m per motor) for switching penalties."""
        c = self.cols
        feats = [c["engine_on"], c["T_e"]]
        if self.arch.dual:
            feats += [c["odd"], c["T_m1"], c["even"], c["T_m2"]]
        else:
            feats += [c["gear"], c["T_m0"]]
        return np.stack(feats, axis=-1)

    def mode(self, k, c):
        name = self.arch.mode_names()[int(self.cols["mode"][k, c])]
        engine = bool(self.cols["engine_on"][k, c])
        clutch = self.arch.kind == "DMPP" and engine
        return Mode(name, engine_on=engine, clutch_engaged=clutch, gear=int(self.cols["gear"][k, c]),
                    odd=int(self.cols["odd"][k, c]), even=int(self.cols["even"][k, c]))

    def decision(self, k, c):
        col = self.cols
        mode = self.mode(k, c)
        w_e = float(col["w_e"][k, c]) if mode.engine_on else None
        return ControlDecision(mode, T_m0=float(col["T_m0"][k, c]), T_m1=float(col["T_m1"][k, c]),
                               T_m2=float(col["T_m2"][k, c]), T_e=float(col["T_e"][k, c]), w_e=w_e,
                               T_bF=float(col["T_bF"][k, c]))


def step_demand(cycle, vehicle):
    """Mean speed, acceleration, grade and wheel-torque demand of each cycle step."""
    v = cycle.step_speed()
    a = cycle.step_accel()
    grade = cycle.step_grade()
    T_w = required_wheel_torque(v, a, grade, vehicle)
    # a vehicle at rest is held by the brakes, no resistance acts
    T_w = np.where((cycle.speed[1:] == 0) & (cycle.speed[:-1] == 0), 0.0, T_w)
    return v, a, grade, T_w


def _braking(arch, v, a, T_w, cap_wheel):
    """Regenerative wheel torque (<= 0) and friction magnitude for each option column."""
    p = arch.vehicle
    F = np.maximum(-T_w, 0.0) / p.r_t
    emergency = is_emergency(-a, p)
    regen = np.zeros_like(cap_wheel)
    for e in range(cap_wheel.shape[1]):
        _, rear = split_braking_array(F, p, emergency, cap_wheel[:, e] / p.r_t)
        regen[:, e] = -np.minimum(rear * p.r_t, cap_wheel[:, e])
    friction = np.maximum(-T_w, 0.0)[:, None] + regen
    return np.where(T_w[:, None] < 0, regen, T_w[:, None]), np.maximum(friction, 0.0)


def _regen_capacity(arch, v):
    """Largest regenerative wheel-torque magnitude of each engagement."""
    w_w = v / arch.vehicle.r_t
    eta = arch.vehicle.eta_t
    c = arch.components
    caps = []
    for g1, g2 in arch.engagements:
        total = np.zeros_like(v)
        for motor, g in ((c.motor1, g1), (c.motor2, g2)) if arch.dual else ((c.motor0, g1),):
            if g:
                r = arch.total_ratio(g)
                t = motor.max_torque(w_w * r)
                total = total + np.where(np.isfinite(t), t * r / eta, -np.inf)
        caps.append(total)
    return np.stack(caps, axis=1)


class _Builder:
    def __init__(self, arch, n):
        self.arch = arch
        self.n = n
        self.blocks = []

    def add(self, valid, emissions, **cols):
        n = self.n
        full = {k: np.zeros(n) for k in CANDIDATE_FIELDS}
        for k, val in cols.items():
            full[k] = np.broadcast_to(np.asarray(val, dtype=float), (n,)).copy()
        em = np.asarray(emissions, dtype=float)
        em = np.broadcast_to(em[:, None] if em.ndim == 1 else em, (len(SPECIES), n)).copy()
        self.blocks.append((np.asarray(valid, dtype=bool) & np.isfinite(full["p_bat"]), em, full))

    def build(self, T_w, v):
        valid = np.stack([b[0] for b in self.blocks], axis=1)
        em = np.stack([b[1] for b in self.blocks], axis=2)
        cols = {k: np.stack([b[2][k] for b in self.blocks], axis=1) for k in CANDIDATE_FIELDS}
        cols["p_bat"] = np.where(valid, cols["p_bat"], 0.0)
        return CandidateSet(self.arch, T_w, v, valid, em, cols)


def _mode_code(arch, name):
    return float(arch.mode_names().index(name))


def control_candidates(arch, cycle, scenario, grid=None):
    """Enumerate SOC-independent control candidates for every step of ``cycle``.

    Fuel and emissions are grams per step; battery power in W.
    """
    if scenario not in ("electric", "hybrid"):
        raise ValidationError("scenario must be 'electric' or 'hybrid'")
    grid = grid or ControlGrid()
    v, a, _, T_w = step_demand(cycle, arch.vehicle)
    dt = cycle.dt
    n = v.size
    c = arch.components
    eta_c = c.eta_c
    w_w = v / arch.vehicle.r_t
    engs = arch.engagements

    cap = _regen_capacity(arch, v)
    tw_motor, friction = _braking(arch, v, a, T_w, np.where(np.isfinite(cap), cap, 0.0))
    cap_ok = np.isfinite(cap) | (T_w[:, None] >= 0)
    # options per engagement, each with its own regen share when braking
    opts_p = np.full((n, len(engs)), np.inf)
    opts_ta = np.zeros((n, len(engs)))
    opts_tb = np.zeros((n, len(engs)))
    for e in range(len(engs)):
        o = electric_options(arch, v, tw_motor[:, e], grid.split_levels, grid.split_tol)
        opts_p[:, e] = np.where(cap_ok[:, e], o.p_bus[:, e], np.inf)
        opts_ta[:, e] = o.T_a[:, e]
        opts_tb[:, e] = o.T_b[:, e]
    order = np.argsort(opts_p, axis=1, kind="stable")

    b = _Builder(arch, n)
    rows = np.arange(n)
    zero_em = np.zeros(len(SPECIES))

    def traction_cols(rank):
        e = order[:, rank]
        g1 = np.array([engs[i][0] for i in e], dtype=float)
        g2 = np.array([engs[i][1] for i in e], dtype=float)
        p = opts_p[rows, e]
        ta, tb = opts_ta[rows, e], opts_tb[rows, e]
        fr = friction[rows, e]
        if arch.dual:
            cols = dict(odd=g1, even=g2, T_m1=ta, T_m2=tb, w_m1=w_w * np.where(g1 > 0, _ratios(arch, g1), 0.0),
                        w_m2=w_w * np.where(g2 > 0, _ratios(arch, g2), 0.0), T_bF=fr)
            name_idx = np.where((g1 > 0) & (g2 > 0), 2, np.where(g1 > 0, 0, 1))
        else:
            cols = dict(gear=g1, T_m0=ta, w_m0=w_w * _ratios(arch, g1), T_bF=fr)
            name_idx = np.where(ta > 0, 0, np.where(ta < 0, 1, 2))
        return p, cols, name_idx

    def electric_block(k):
        p, cols, name_idx = traction_cols(k)
        mode = name_idx.astype(float)
        b.add(np.isfinite(p), zero_em, p_bat=comp.bus_to_battery(np.where(np.isfinite(p), p, 0.0), eta_c)
              + np.where(np.isfinite(p), 0.0, np.inf), fuel=0.0, mode=mode, **cols)

    n_el = min(grid.electric_options, len(engs)) if scenario == "electric" else min(grid.series_traction_options, len(engs))
    if scenario == "electric" or arch.kind == "DMPP":
        for k in range(n_el):
            electric_block(k)
        if scenario == "electric":
            return b.build(T_w, v)

    if arch.kind in ("SMSP", "DMSP"):
        egu = egu_table(arch, grid.engine_levels)
        for k in range(n_el):
            p, cols, name_idx = traction_cols(k)
            ok = np.isfinite(p)
            p0 = np.where(ok, p, 0.0)
            b.add(ok, zero_em, p_bat=comp.bus_to_battery(p0, eta_c) + np.where(ok, 0.0, np.inf), fuel=0.0,
                  mode=name_idx.astype(float), **cols)
            for lv in range(grid.engine_levels):
                b.add(ok, egu.emissions[:, lv] * dt,
                      p_bat=comp.bus_to_battery(p0 - egu.p_gen[lv], eta_c) + np.where(ok, 0.0, np.inf),
                      fuel=egu.fuel[lv] * dt, mode=name_idx.astype(float) + 3, engine_on=1.0,
                      T_e=egu.T_e[lv], w_e=egu.w_e[lv], T_g=-egu.T_e[lv], w_g=egu.w_e[lv], P_gen=egu.p_gen[lv], **cols)
        return b.build(T_w, v)

    _dmpp_hybrid_blocks(arch, b, v, a, T_w, w_w, friction, opts_p, grid, dt)
    return b.build(T_w, v)


def _ratios(arch, gears):
    table = np.array([0.0] + [r * arch.i0 for r in arch.ratios])
    return table[np.asarray(gears, dtype=int)]


def _dmpp_hybrid_blocks(arch, b, v, a, T_w, w_w, friction, opts_p, grid, dt):
    c = arch.components
    eng = c.engine
    eta = arch.vehicle.eta_t
    eta_c = c.eta_c
    n = v.size
    engs = arch.engagements

    # series: motor 1 alone in its best odd gear, motor 2 generating on the engine shaft
    odd_only = [i for i, e in enumerate(engs) if e[1] == 0]
    sub = opts_p[:, odd_only]
    pick = np.argmin(sub, axis=1)
    e_idx = np.array(odd_only)[pick]
    g1 = np.array([engs[i][0] for i in e_idx], dtype=float)
    p_tr = sub[np.arange(n), pick]
    ok = np.isfinite(p_tr)
    p0 = np.where(ok, p_tr, 0.0)
    r1 = _ratios(arch, g1)
    tw1, fr1 = _braking_single(arch, v, a, T_w, r1, c.motor1)
    t1 = _shaft_torque(tw1, r1, eta)
    egu = egu_table(arch, grid.engine_levels)
    for lv in range(grid.engine_levels):
        b.add(ok, egu.emissions[:, lv] * dt, p_bat=comp.bus_to_battery(p0 - egu.p_gen[lv], eta_c) + np.where(ok, 0.0, np.inf),
              fuel=egu.fuel[lv] * dt, mode=_mode_code(arch, "series"), engine_on=1.0, odd=g1, T_m1=t1,
              w_m1=w_w * r1, T_m2=-egu.T_e[lv], w_m2=egu.w_e[lv], T_e=egu.T_e[lv], w_e=egu.w_e[lv],
              T_g=-egu.T_e[lv], w_g=egu.w_e[lv], P_gen=egu.p_gen[lv], T_bF=fr1)

    # engine-only and parallel operation through an even gear (traction only)
    drive = T_w > 0
    for g_e in (2, 4):
        r_e = arch.total_ratio(g_e)
        w_e = w_w * r_e
        env = eng.torque_envelope(w_e)
        kin = np.isfinite(env) & drive
        env0 = np.where(kin, env, 0.0)
        w_safe = np.where(kin, w_e, eng.idle_speed)

        # engine alone carries the demand exactly
        t_only = np.where(kin, T_w / (r_e * eta), 0.0)
        ok_only = kin & (t_only <= env0 + 1e-9)
        t_only = np.where(ok_only, t_only, 0.0)
        f_only = eng.fuel_rate(w_safe, t_only)
        em_only = np.stack([eng.emission_rate(w_safe, t_only, sp) for sp in SPECIES])
        b.add(ok_only, em_only * dt, p_bat=np.where(ok_only, 0.0, np.inf), fuel=f_only * dt,
              mode=_mode_code(arch, "engine"), engine_on=1.0, even=float(g_e), w_m2=w_e,
              T_e=t_only, w_e=w_safe)

        for lv in range(grid.parallel_levels):
            t_e = env0 * lv / (grid.parallel_levels - 1)
            fuel = eng.fuel_rate(w_safe, t_e)
            em = np.stack([eng.emission_rate(w_safe, t_e, sp) for sp in SPECIES])
            best_p = np.full(n, np.inf)
            best = {}
            for name, g_o in (("P-m2", 0), ("P-m1", 1), ("P-m1", 3), ("P-m1m2", 1), ("P-m1m2", 3)):
                ev = _DualEval(arch, w_w, T_w, g_o, g_e, t_e)
                if name == "P-m2":
                    f = np.zeros(n)
                    p = ev(f)
                elif name == "P-m1":
                    # motor 2 unpowered: the even shaft carries the engine torque alone
                    f = np.where(T_w != 0, 1.0 - t_e * r_e * eta / np.where(T_w != 0, T_w, 1.0), 1.0)
                    p = ev(f)
                else:
                    f, p = _split_search(ev, grid.split_levels, grid.split_tol)
                t1p, t2p = ev.torques(f)
                if name == "P-m1":
                    t2p = np.zeros(n)
                better = p < best_p
                best_p = np.where(better, p, best_p)
                for key, val in (("mode", _mode_code(arch, name)), ("odd", float(g_o)), ("T_m1", t1p), ("T_m2", t2p)):
                    best[key] = np.where(better, val, best.get(key, 0.0))
            ok_p = kin & np.isfinite(best_p)
            g_odd = best["odd"]
            b.add(ok_p, em * dt, p_bat=comp.bus_to_battery(np.where(ok_p, best_p, 0.0), eta_c) + np.where(ok_p, 0.0, np.inf),
                  fuel=fuel * dt, mode=best["mode"], engine_on=1.0, odd=g_odd, even=float(g_e),
                  T_m1=best["T_m1"], w_m1=w_w * _ratios(arch, g_odd), T_m2=best["T_m2"], w_m2=w_e,
                  T_e=t_e, w_e=w_safe)


def _braking_single(arch, v, a, T_w, r, motor):
    """Regen share and friction for one motor at per-step total ratios ``r``."""
    w = v / arch.vehicle.r_t * r
    t = motor.max_torque(w)
    cap = np.where(np.isfinite(t), t * r / arch.vehicle.eta_t, 0.0)
    tw, fr = _braking(arch, v, a, T_w, cap[:, None])
    return tw[:, 0], fr[:, 0]
