"""Driving-cycle ingestion, built-in cycles and resampling.

Speeds are held internally in m/s; CSV files carry km/h and grade in percent.
"""
import csv
import io
from pathlib import Path
from dataclasses import dataclass, field

import numpy as np

from .errors import CycleFormatError, CycleParseError, ValidationError

KMH = 1.0 / 3.6
MAX_ABS_ACCEL = 5.0
DT_TOLERANCE = 1e-6

# ECE-15 elementary urban cycle: (time s, speed km/h) knots of the piecewise-linear profile.
ECE15_KNOTS = (
    (0, 0), (11, 0), (15, 15), (23, 15), (25, 10), (28, 0), (49, 0), (54, 15),
    (56, 15), (61, 32), (85, 32), (93, 10), (96, 0), (117, 0), (122, 15), (124, 15),
    (133, 35), (135, 35), (143, 50), (155, 50), (163, 35), (176, 35), (178, 32),
    (185, 10), (188, 0), (195, 0),
)

# Stand-in for the Chinese city-bus cycle: micro-trips of (plateaus [(km/h, hold s)], idle s).
CBDC_TRIPS = (
    (((20, 15),), 20),
    (((30, 20), (40, 15)), 25),
    (((25, 25),), 18),
    (((35, 35),), 30),
    (((45, 25), (30, 15)), 22),
    (((20, 20),), 18),
    (((40, 40),), 25),
    (((60, 30), (45, 20)), 30),
    (((30, 25),), 20),
    (((25, 15), (35, 20)), 18),
    (((50, 35),), 25),
    (((20, 15),), 20),
    (((40, 25), (25, 15)), 25),
    (((30, 30),), 18),
)
# acceleration tapers with speed so every drivetrain (incl. motor 2 alone in 4th) can follow
CBDC_ACCEL_STEPS = ((35.0, 0.8), (50.0, 0.45), (float("inf"), 0.2))
CBDC_DECEL = 1.0
CBDC_LEAD_IDLE = 10.0
CBDC_DURATION = 1300


@dataclass(frozen=True)
class DrivingCycle:
    name: str
    dt: float
    speed: np.ndarray
    grade: np.ndarray = field(default=None)

    def __post_init__(self):
        speed = np.array(self.speed, dtype=float)
        grade = np.zeros_like(speed) if self.grade is None else np.array(self.grade, dtype=float)
        if speed.ndim != 1 or speed.size < 2:
            raise ValidationError("cycle needs at least two samples")
        if grade.shape != speed.shape:
            raise ValidationError("speed and grade lengths differ")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not np.all(np.isfinite(speed)) or np.any(speed < 0):
            raise ValidationError("speeds must be finite and non-negative")
        accel = np.diff(speed) / self.dt
        if np.any(np.abs(accel) > MAX_ABS_ACCEL):
            k = int(np.argmax(np.abs(accel)))
            raise ValidationError(f"implied acceleration {accel[k]:.2f} m/s^2 at step {k} exceeds {MAX_ABS_ACCEL}")
        speed.setflags(write=False)
        grade.setflags(write=False)
        object.__setattr__(self, "speed", speed)
        object.__setattr__(self, "grade", grade)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self):
        return self.speed.size

    @property
    def time(self):
        return np.arange(self.speed.size) * self.dt

    @property
    def duration(self):
        return (self.speed.size - 1) * self.dt

    def distance(self):
        """Trapezoidal distance in metres."""
        return float(np.sum(0.5 * (self.speed[1:] + self.speed[:-1])) * self.dt)

    def mean_speed(self):
        return self.distance() / self.duration

    def step_speed(self):
        """Mean speed over each step (backward-facing quasi-static convention)."""
        return 0.5 * (self.speed[1:] + self.speed[:-1])

    def step_accel(self):
        return np.diff(self.speed) / self.dt

    def step_grade(self):
        return 0.5 * (self.grade[1:] + self.grade[:-1])


def load_cycle(source, name="cycle"):
    """Parse ``time_s,speed_kmh[,grade_pct]`` CSV text from a binary or text stream."""
    raw = source.read()
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise CycleParseError("empty file", line=1)
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["time_s", "speed_kmh"] or len(header) > 3 or (len(header) == 3 and header[2] != "grade_pct"):
        raise CycleParseError(f"unexpected header {','.join(header)!r}", line=1)
    ncol = len(header)
    times, speeds, grades = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != ncol:
            raise CycleParseError(f"expected {ncol} fields, got {len(row)}", line=lineno)
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise CycleParseError(str(exc), line=lineno) from None
        if vals[1] < 0:
            raise ValidationError(f"line {lineno}: negative speed {vals[1]}")
        times.append(vals[0])
        speeds.append(vals[1])
        grades.append(vals[2] if ncol == 3 else 0.0)
    if len(times) < 2:
        raise ValidationError("cycle needs at least two samples")
    t = np.array(times)
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise CycleFormatError("time must be strictly increasing")
    dt = float(steps[0])
    if np.any(np.abs(steps - dt) > DT_TOLERANCE):
        raise CycleFormatError("non-uniform time step")
    return DrivingCycle(name, dt, np.array(speeds) * KMH, np.array(grades) / 100.0)


def write_cycle(cycle, sink):
    """Write a cycle in the CSV format read by :func:`load_cycle` (text sink)."""
    sink.write("time_s,speed_kmh,grade_pct\n")
    for t, v, g in zip(cycle.time, cycle.speed, cycle.grade):
        sink.write(f"{float(t)!r},{float(v) * 3.6!r},{float(g) * 100.0!r}\n")


def _from_knots(name, knots_t, knots_kmh, duration, dt=1.0):
    t = np.arange(0.0, duration + 0.5 * dt, dt)
    v = np.interp(t, knots_t, knots_kmh) * KMH
    return DrivingCycle(name, dt, v)


def ece15():
    t, v = zip(*ECE15_KNOTS)
    return _from_knots("ece15", t, v, 195)


def _ece15x5():
    base = ece15().speed
    speed = np.concatenate([base] + [base[1:]] * 4)
    return DrivingCycle("ece15x5", 1.0, speed)


def _cbdc_synthetic():
    t = [0.0, CBDC_LEAD_IDLE]
    v = [0.0, 0.0]
    for plateaus, idle in CBDC_TRIPS:
        for kmh, hold in plateaus:
            if kmh > v[-1]:
                for top, rate in CBDC_ACCEL_STEPS:
                    if v[-1] < top:
                        nxt = min(top, kmh)
                        t.append(t[-1] + (nxt - v[-1]) * KMH / rate)
                        v.append(nxt)
                    if kmh <= top:
                        break
            else:
                t.append(t[-1] + (v[-1] - kmh) * KMH / CBDC_DECEL)
                v.append(kmh)
            t.append(t[-1] + hold)
            v.append(kmh)
        t.append(t[-1] + v[-1] * KMH / CBDC_DECEL)
        v.append(0.0)
        t.append(t[-1] + idle)
        v.append(0.0)
    if t[-1] > CBDC_DURATION:
        raise AssertionError("micro-trip table longer than the cycle")
    t.append(float(CBDC_DURATION))
    v.append(0.0)
    return _from_knots("cbdc-synthetic", t, v, CBDC_DURATION)


BUILTIN_CYCLES = {"ece15x5": _ece15x5, "cbdc-synthetic": _cbdc_synthetic}


def builtin_cycle(name):
    try:
        factory = BUILTIN_CYCLES[name]
    except KeyError:
        raise LookupError(f"unknown builtin cycle {name!r}; choose from {sorted(BUILTIN_CYCLES)}") from None
    return factory()


def resample(cycle, dt_new):
    if not dt_new > 0:
        raise ValueError("dt_new must be positive")
    if dt_new == cycle.dt:
        return cycle
    n = int(np.floor(cycle.duration / dt_new + 1e-9)) + 1
    t_new = np.arange(n) * dt_new
    speed = np.interp(t_new, cycle.time, cycle.speed)
    grade = np.interp(t_new, cycle.time, cycle.grade)
    return DrivingCycle(cycle.name, dt_new, speed, grade)


def resolve_cycle(spec):
    """Accept a builtin name or a CSV path."""
    if spec in BUILTIN_CYCLES:
        return builtin_cycle(spec)
    with open(spec, "rb") as fh:
        return load_cycle(fh, name=Path(spec).stem)
