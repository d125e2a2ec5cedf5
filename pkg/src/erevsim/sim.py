"""Closed-loop cycle simulation, performance indexes, energy audit and reports."""
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import components as comp
from .ems import EmsConfig, MpcController, SocReference, build_soc_reference
from .errors import InfeasibleHorizon, SimulationAbort, SocConstraintViolation, ValidationError
from .powertrain import SPECIES, control_candidates, motor_electric_power, wheel_torque

DEFAULT_SOC_INIT = {"electric": 0.8, "hybrid": 0.32}

TRACE_COLUMNS = (
    "t", "v", "T_w", "mode", "engine_on", "gear", "odd", "even",
    "T_e", "w_e", "T_g", "w_g",
    "T_m0", "w_m0", "T_m1", "w_m1", "T_m2", "w_m2",
    "P_m0", "P_m1", "P_m2", "P_gen", "P_bus", "P_bat",
    "soc", "soc_end", "soc_ref", "T_bF",
    "fuel_g", "HC_g", "CO_g", "NOx_g", "PM_g",
)


@dataclass
class SimTrace:
    """One row per cycle step; ``soc`` is the value at the start of the step."""

    arch_kind: str
    cycle_name: str
    scenario: str
    dt: float
    mode_names: tuple
    data: dict = field(default_factory=dict)

    def __len__(self):
        return self.data["t"].size if self.data else 0

    def __getitem__(self, key):
        return self.data[key]

    @property
    def soc_final(self):
        return float(self.data["soc_end"][-1]) if len(self) else math.nan

    def to_csv(self, sink):
        sink.write(",".join(TRACE_COLUMNS) + "\n")
        cols = [self.data[c] for c in TRACE_COLUMNS]
        for row in zip(*cols):
            sink.write(",".join(repr(float(x)) for x in row) + "\n")

    def csv_text(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def read_trace_csv(source):
    """Load the column dictionary written by :meth:`SimTrace.to_csv`."""
    text = source.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValidationError("empty trace file")
    header = lines[0].split(",")
    if not set(("t", "soc")).issubset(header):
        raise ValidationError("not a trace file: missing t/soc columns")
    rows = [[float(x) for x in ln.split(",")] for ln in lines[1:]]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {h: arr[:, i] for i, h in enumerate(header)}


def _motor_specs(arch):
    c = arch.components
    return {"m0": c.motor0, "m1": c.motor1, "m2": c.motor2}


def simulate(arch, cycle, ems_cfg=None, scenario="hybrid", soc_init=None):
    cfg = ems_cfg or EmsConfig()
    if scenario not in DEFAULT_SOC_INIT:
        raise ValidationError("scenario must be 'electric' or 'hybrid'")
    soc = DEFAULT_SOC_INIT[scenario] if soc_init is None else float(soc_init)
    if not cfg.soc_min <= soc <= cfg.soc_max:
        raise ValidationError(f"soc_init {soc} outside [{cfg.soc_min}, {cfg.soc_max}]")
    bat = arch.components.battery
    dt = cycle.dt
    cands = control_candidates(arch, cycle, scenario, cfg.grid)
    if scenario == "hybrid":
        ref = build_soc_reference(cycle, arch.vehicle, soc, cfg.soc_min)
    else:
        ref = SocReference(np.full(len(cycle), soc))
    ctl = MpcController(arch, cands, ref, cfg, scenario, dt)
    n = cands.n_steps
    chosen = np.empty(n, dtype=np.int64)
    soc_start = np.empty(n)
    soc_end = np.empty(n)
    prev = None
    for k in range(n):
        try:
            sol = ctl.solve(k, soc, prev)
        except (InfeasibleHorizon, SocConstraintViolation) as exc:
            raise SimulationAbort(str(exc), step=k) from exc
        c = int(sol.controls[0])
        ds = float(bat.dsoc(soc, cands.p_bat[k, c]))
        nxt = soc + ds * dt
        if not (cfg.soc_min <= nxt <= cfg.soc_max) or math.isnan(nxt):
            raise SimulationAbort(f"SOC {nxt:.6f} would leave [{cfg.soc_min}, {cfg.soc_max}]", step=k)
        chosen[k] = c
        soc_start[k] = soc
        soc_end[k] = nxt
        soc = nxt
        prev = ctl.features[k, c]

    rows = np.arange(n)
    col = {name: cands.cols[name][rows, chosen] for name in cands.cols}
    data = {"t": cycle.time[:-1], "v": cands.v, "T_w": cands.T_w}
    for name in ("mode", "engine_on", "gear", "odd", "even", "T_e", "w_e", "T_g", "w_g",
                 "T_m0", "w_m0", "T_m1", "w_m1", "T_m2", "w_m2", "T_bF", "P_bat"):
        data[name] = col[name if name != "P_bat" else "p_bat"]
    specs = _motor_specs(arch)
    for m in ("m0", "m1", "m2"):
        T, w = data["T_" + m], data["w_" + m]
        if arch.kind == "DMPP" and m == "m2":
            # motor 2 doubles as the generator in series operation
            T = np.where(data["mode"] == arch.mode_names().index("series"), 0.0, T)
        p, _ = motor_electric_power(specs[m], w, T)
        data["P_" + m] = np.where(T == 0, 0.0, p)
    data["P_gen"] = col["P_gen"]
    data["P_bus"] = data["P_m0"] + data["P_m1"] + data["P_m2"] - data["P_gen"]
    data["soc"] = soc_start
    data["soc_end"] = soc_end
    data["soc_ref"] = ref.values[:-1]
    data["fuel_g"] = col["fuel"]
    for i, sp in enumerate(SPECIES):
        data[sp + "_g"] = cands.emissions[i, rows, chosen]
    trace = SimTrace(arch.kind, cycle.name, scenario, dt, arch.mode_names(), data)
    _check_trace(arch, cands, chosen, trace)
    return trace


def _check_trace(arch, cands, chosen, trace):
    """Re-derive wheel torque and bus power of every applied decision."""
    d = trace.data
    eta_c = arch.components.eta_c
    p_bat = comp.bus_to_battery(d["P_bus"], eta_c)
    if not np.allclose(p_bat, d["P_bat"], rtol=1e-6, atol=1e-3):
        k = int(np.argmax(np.abs(p_bat - d["P_bat"])))
        raise SimulationAbort(f"battery power mismatch {p_bat[k]:.3f} vs {d['P_bat'][k]:.3f} W", step=k)
    for k in range(len(trace)):
        dec = cands.decision(k, int(chosen[k]))
        tw = wheel_torque(arch, dec)
        if abs(tw - d["T_w"][k]) > 1e-6 * max(1.0, abs(d["T_w"][k])):
            raise SimulationAbort(f"wheel torque {tw:.6f} does not meet demand {d['T_w'][k]:.6f}", step=k)


# ---------------------------------------------------------------------------
# indexes and audit


@dataclass(frozen=True)
class IndexRow:
    arch: str
    scenario: str
    EC: float  # kWh
    FC: float  # dm^3
    HC: float
    CO: float
    NOx: float
    PM: float
    soc_final: float

    def values(self):
        return {"EC": self.EC, "FC": self.FC, "HC": self.HC, "CO": self.CO, "NOx": self.NOx, "PM": self.PM}


def performance_indexes(trace, rho_f=comp.DIESEL_DENSITY):
    d = trace.data
    dt = trace.dt
    ec = float(np.sum(np.maximum(d["P_bat"], 0.0)) * dt - np.sum(np.maximum(-d["P_bat"], 0.0)) * dt) / 3.6e6
    return IndexRow(trace.arch_kind, trace.scenario, ec, float(np.sum(d["fuel_g"])) / rho_f,
                    *(float(np.sum(d[sp + "_g"])) for sp in SPECIES), trace.soc_final)


def mean_motor_efficiency(trace):
    """Arithmetic mean of the working-point efficiency of each traction motor.

    Every step on which the motor converts power (driving or regenerating)
    counts once, matching how a scatter of working points on the map is read.
    """
    d = trace.data
    out = {}
    for m in ("m0", "m1", "m2"):
        pm = d["T_" + m] * d["w_" + m]
        pe = d["P_" + m]
        drive = (pm > 0) & (pe > 0)
        regen = (pm < 0) & (pe < 0)
        if not (drive.any() or regen.any()):
            continue
        eta = np.concatenate([pm[drive] / pe[drive], pe[regen] / pm[regen]])
        out[m] = float(np.mean(eta))
    return out


def energy_audit(trace, arch):
    """Relative imbalance between energy sources and sinks over the run.

    Sources: chemical energy released by the battery (exact open-circuit-voltage
    integral along the SOC path) and engine shaft work.  Sinks: wheel demand,
    friction braking, driveline, motor, generator, converter and ohmic losses.
    The residual stems from the explicit Euler SOC update and shrinks with dt.
    """
    d = trace.data
    dt = trace.dt
    bat = arch.components.battery
    if len(trace) == 0:
        return 0.0
    e_chem = bat.ocv_energy(d["soc"], d["soc_end"])
    current = -bat.capacity * (d["soc_end"] - d["soc"]) / dt
    r = np.where(d["P_bat"] >= 0, bat.r_int(d["soc"], "discharge"), bat.r_int(d["soc"], "charge"))
    ohmic = current ** 2 * r * dt
    conv = np.abs(d["P_bat"] - d["P_bus"]) * dt
    eng = d["T_e"] * d["w_e"] * dt * (d["engine_on"] > 0)
    gen_loss = np.where(d["P_gen"] > 0, eng - d["P_gen"] * dt, 0.0)
    motor_loss = np.zeros_like(e_chem)
    shaft_work = np.zeros_like(e_chem)
    for m in ("m0", "m1", "m2"):
        pm = d["T_" + m] * d["w_" + m] * dt
        if arch.kind == "DMPP" and m == "m2":
            pm = np.where(d["P_gen"] > 0, 0.0, pm)
        motor_loss += np.abs(d["P_" + m] * dt - pm)
        shaft_work += pm
    # engine work reaching the wheels in parallel operation
    shaft_work += np.where(d["P_gen"] > 0, 0.0, eng)
    w_w = d["v"] / arch.vehicle.r_t
    wheel = (d["T_w"] + d["T_bF"]) * w_w * dt
    driveline = shaft_work - wheel
    demand = d["T_w"] * w_w * dt
    friction = d["T_bF"] * w_w * dt
    sources = e_chem + eng
    sinks = demand + friction + driveline + motor_loss + gen_loss + conv + ohmic
    through = np.sum(np.abs(e_chem)) + np.sum(eng) + np.sum(np.abs(demand)) + np.sum(friction)
    if through == 0:
        return 0.0
    return float(abs(np.sum(sources) - np.sum(sinks)) / through)


# ---------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class PerformanceReport:
    rows: tuple  # IndexRow, grouped by scenario in input order
    baseline: str

    def reduction(self, row, key):
        base = next(r for r in self.rows if r.scenario == row.scenario and r.arch == self.baseline)
        b = base.values()[key]
        if b == 0:
            return 0.0 if row.values()[key] == 0 else -math.inf
        return (b - row.values()[key]) / b * 100.0

    def to_csv(self):
        keys = ("EC", "FC", "HC", "CO", "NOx", "PM")
        out = ["scenario,arch," + ",".join(keys) + ",soc_final," + ",".join(f"red_{k}_pct" for k in keys)]
        for r in self.rows:
            vals = r.values()
            out.append(",".join([r.scenario, r.arch] + [f"{vals[k]:.6f}" for k in keys] + [f"{r.soc_final:.6f}"]
                                + [f"{self.reduction(r, k):.3f}" for k in keys]))
        return "\n".join(out) + "\n"

    def to_table(self):
        keys = ("EC", "FC", "HC", "CO", "NOx", "PM")
        units = {"EC": "kWh", "FC": "dm3", "HC": "g", "CO": "g", "NOx": "g", "PM": "g"}
        head = f"{'scenario':<9} {'arch':<5} " + " ".join(f"{k + '[' + units[k] + ']':>12}" for k in keys) + f" {'SOC_end':>8}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            vals = r.values()
            lines.append(f"{r.scenario:<9} {r.arch:<5} " + " ".join(f"{vals[k]:>12.6f}" for k in keys) + f" {r.soc_final:>8.4f}")
            lines.append(f"{'':<9} {'red%':<5} " + " ".join(f"{self.reduction(r, k):>12.3f}" for k in keys))
        return "\n".join(lines) + "\n"


def _run_one(args):
    arch, cycle, cfg, scenario, soc_init = args
    trace = simulate(arch, cycle, cfg, scenario, soc_init)
    return performance_indexes(trace)


def compare(archs, cycle, scenarios=("hybrid",), ems_cfg=None, soc_init=None, workers=1):
    """Run every (scenario, architecture) pair; reductions are relative to the first architecture."""
    if not archs:
        raise ValidationError("need at least one architecture")
    jobs = [(a, cycle, ems_cfg, s, (soc_init or {}).get(s)) for s in scenarios for a in archs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(j) for j in jobs]
    return PerformanceReport(tuple(rows), archs[0].kind)
