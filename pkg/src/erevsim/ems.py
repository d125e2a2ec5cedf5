"""Receding-horizon energy management solved by forward dynamic programming.

The optimiser state is the pair (SOC grid node, previous control): switching
penalties couple consecutive controls, so keeping the previous control in the
state makes the recursion exact on the discretised problem.
"""
from dataclasses import dataclass, field, fields

import numpy as np

from . import kernels
from .errors import InfeasibleHorizon, SocConstraintViolation, ValidationError
from .powertrain import ControlGrid, step_demand


@dataclass(frozen=True)
class EmsConfig:
    """Optimiser settings.  Fuel in grams per step is the base cost unit.

    ``horizon`` is the preview length in seconds (5 steps at dt = 1 s).
    ``rho_soc`` is charged per unit SOC deviation per second of horizon.
    ``electric_equivalence`` (g/J) prices battery energy when the engine is
    locked off, so the electric-only optimiser still has an objective.
    """

    horizon: int = 5
    soc_grid_points: int = 201
    soc_min: float = 0.3
    soc_max: float = 0.9
    rho_soc: float = 8000.0
    rho_Se: float = 0.5
    rho_Te: float = 0.002
    rho_Sm0: float = 0.05
    rho_Tm0: float = 0.001
    rho_Sm1: float = 0.05
    rho_Tm1: float = 0.001
    rho_Sm2: float = 0.05
    rho_Tm2: float = 0.001
    electric_equivalence: float = 2.5e-5
    grid: ControlGrid = field(default_factory=ControlGrid)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if self.soc_grid_points < 2:
            raise ValidationError("soc_grid_points must be >= 2")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise ValidationError("need 0 <= soc_min < soc_max <= 1")
        for f in fields(self):
            if f.name.startswith("rho_") and getattr(self, f.name) < 0:
                raise ValidationError(f"{f.name} must be >= 0")
        if self.electric_equivalence <= 0:
            raise ValidationError("electric_equivalence must be positive")

    def switch_weights(self, arch):
        if arch.dual:
            return np.array([self.rho_Se, self.rho_Te, self.rho_Sm1, self.rho_Tm1, self.rho_Sm2, self.rho_Tm2])
        return np.array([self.rho_Se, self.rho_Te, self.rho_Sm0, self.rho_Tm0])


@dataclass(frozen=True)
class SocReference:
    values: np.ndarray  # one entry per cycle sample

    def __len__(self):
        return self.values.size


def build_soc_reference(cycle, vehicle, soc_init, soc_min):
    """SOC target falling in proportion to cumulative positive traction energy."""
    if not soc_min < soc_init:
        raise ValidationError("soc_min must be below soc_init")
    v, _, _, T_w = step_demand(cycle, vehicle)
    e_pos = np.maximum(T_w * v / vehicle.r_t, 0.0) * cycle.dt
    cum = np.concatenate([[0.0], np.cumsum(e_pos)])
    if cum[-1] <= 0:
        return SocReference(np.full(cum.size, float(soc_init)))
    return SocReference(soc_init - (soc_init - soc_min) * cum / cum[-1])


def switch_features(arch, decision):
    """(S_e, T_e, S_m, T_m per motor); S_m is the engaged gear number (0 when disengaged)."""
    m = decision.mode
    head = [1.0 if m.engine_on else 0.0, decision.T_e]
    if arch.dual:
        return np.array(head + [m.odd, decision.T_m1, m.even, decision.T_m2], dtype=float)
    return np.array(head + [m.gear, decision.T_m0], dtype=float)


def stage_cost(arch, state_prev, decision, soc, soc_ref, cfg, dt=1.0, base=None):
    """Per-step objective: base cost + SOC tracking + weighted state/torque switching.

    ``base`` defaults to the engine fuel mass over the step; ``state_prev`` is a
    feature vector from :func:`switch_features` (``None`` = no previous state).
    """
    if base is None:
        base = 0.0
        if decision.mode.engine_on:
            w_e = decision.w_e if decision.w_e is not None else arch.components.engine.idle_speed
            base = float(arch.components.engine.fuel_rate(w_e, decision.T_e)) * dt
    x = switch_features(arch, decision)
    prev = x if state_prev is None else np.asarray(state_prev, dtype=float)
    sw = float(np.sum(cfg.switch_weights(arch) * np.abs(x - prev)))
    return (base + cfg.rho_soc * dt * abs(soc - soc_ref)) + sw


@dataclass(frozen=True)
class HorizonWindow:
    """Optimiser input for ``p`` stages and ``C`` control slots."""

    p_bat: np.ndarray  # (p, C) W
    valid: np.ndarray  # (p, C)
    base: np.ndarray  # (p, C) base cost per step
    features: np.ndarray  # (p, C, D) switching features
    soc_ref: np.ndarray  # (p,) reference at the end of each stage
    dt: float
    track: bool = True
    soc_lo: np.ndarray = None  # (p,) per-stage lower bound; None = configured minimum
    soc_hi: np.ndarray = None

    @property
    def stages(self):
        return self.p_bat.shape[0]

    def bounds(self, cfg):
        p = self.stages
        lo = np.full(p, cfg.soc_min) if self.soc_lo is None else np.maximum(self.soc_lo, cfg.soc_min)
        hi = np.full(p, cfg.soc_max) if self.soc_hi is None else np.minimum(self.soc_hi, cfg.soc_max)
        return lo, hi

    def head(self, stages):
        cut = (lambda a: None if a is None else a[:stages])
        return HorizonWindow(self.p_bat[:stages], self.valid[:stages], self.base[:stages],
                             self.features[:stages], self.soc_ref[:stages], self.dt, self.track,
                             cut(self.soc_lo), cut(self.soc_hi))

    def relaxed(self):
        return HorizonWindow(self.p_bat, self.valid, self.base, self.features, self.soc_ref, self.dt, self.track)


@dataclass(frozen=True)
class HorizonSolution:
    controls: np.ndarray  # control slot per stage
    cost: float
    soc_nodes: np.ndarray  # chosen grid node per stage
    soc: np.ndarray  # SOC value of the chosen node per stage
    grid: np.ndarray  # (p, N) node values


def soc_bands(battery, window, soc_0, cfg):
    """Per-stage node grids spanning the SOC reachable from ``soc_0``."""
    n = cfg.soc_grid_points
    b_lo, b_hi = window.bounds(cfg)
    lo = hi = float(soc_0)
    rows = []
    for k in range(window.stages):
        p = window.p_bat[k][window.valid[k]]
        if p.size == 0:
            rows.append(np.linspace(lo, hi, n))
            continue
        edges = []
        for s in (lo, hi):
            ds = battery.dsoc(np.full(p.size, s), p)
            ds = ds[np.isfinite(ds)]
            if ds.size:
                edges += [s + ds.min() * window.dt, s + ds.max() * window.dt]
        if edges:
            lo, hi = min(edges), max(edges)
        lo_c = min(max(lo, b_lo[k]), b_hi[k])
        hi_c = max(min(hi, b_hi[k]), b_lo[k])
        rows.append(np.linspace(lo_c, hi_c, n))
        lo, hi = lo_c, hi_c
    return np.array(rows)


def switching_matrices(window, weights, prev_features):
    x = window.features
    sw0 = np.sum(weights * np.abs(x[0] - prev_features[None, :]), axis=-1) if prev_features is not None \
        else np.zeros(x.shape[1])
    sw = np.zeros((window.stages, x.shape[1], x.shape[1]))
    for k in range(1, window.stages):
        sw[k] = np.sum(weights * np.abs(x[k][None, :, :] - x[k - 1][:, None, :]), axis=-1)
    return sw0, sw


def dp_solve_horizon(arch, window, soc_0, state_prev, cfg):
    """Forward DP over the horizon; returns the optimal control sequence."""
    bat = arch.components.battery
    if not cfg.soc_min <= soc_0 <= cfg.soc_max:
        raise SocConstraintViolation(f"soc {soc_0:.6f} outside [{cfg.soc_min}, {cfg.soc_max}]")
    nodes = soc_bands(bat, window, soc_0, cfg)
    b_lo, b_hi = window.bounds(cfg)
    sw0, sw = switching_matrices(window, cfg.switch_weights(arch), state_prev)
    rho = cfg.rho_soc * window.dt if window.track else 0.0
    best, ctrl, node, fail = kernels.dp_forward(
        float(soc_0), np.ascontiguousarray(nodes), np.ascontiguousarray(window.p_bat, dtype=float),
        np.ascontiguousarray(window.valid), np.ascontiguousarray(window.base, dtype=float), sw0, sw,
        np.ascontiguousarray(window.soc_ref, dtype=float), float(rho), b_lo, b_hi,
        float(window.dt), float(bat.capacity), bat.uoc_table, bat.r_dis_table, bat.r_chg_table)
    if fail >= 0:
        if window.valid[fail].any():
            exc = SocConstraintViolation(
                f"every control at stage {fail} leaves [{b_lo[fail]:.4f}, {b_hi[fail]:.4f}]")
            exc.stage = fail
            raise exc
        raise InfeasibleHorizon("no feasible control", stage=fail)
    soc = nodes[np.arange(window.stages), node]
    return HorizonSolution(ctrl, float(best), node, soc, nodes)


class MpcController:
    """Builds horizon windows from precomputed candidates and a SOC reference.

    Besides the fixed SOC limits, each step carries a viability boundary: the
    lowest (highest) SOC from which the remaining cycle can still be driven
    without leaving the limits, obtained by a backward pass with the most
    charging (discharging) candidate of every step.  It keeps the short horizon
    from running the battery into a state that a later high-power demand
    cannot recover from.
    """

    def __init__(self, arch, candidates, reference, cfg, scenario, dt):
        self.arch = arch
        self.cands = candidates
        self.ref = reference.values
        self.cfg = cfg
        self.dt = dt
        self.steps = horizon_steps(cfg, dt)
        self.track = scenario == "hybrid"
        self.features = candidates.switch_state()
        if self.track:
            self.base = candidates.fuel
        else:
            self.base = cfg.electric_equivalence * candidates.p_bat * dt
        self.floor, self.ceiling = viability_bounds(arch.components.battery, candidates.p_bat, candidates.valid,
                                                    cfg, dt)

    def window(self, k):
        stop = min(k + self.steps, self.cands.n_steps)
        c = self.cands
        return HorizonWindow(c.p_bat[k:stop], c.valid[k:stop], self.base[k:stop], self.features[k:stop],
                             self.ref[k + 1:stop + 1], self.dt, self.track,
                             self.floor[k + 1:stop + 1], self.ceiling[k + 1:stop + 1])

    def solve(self, k, soc, prev_features):
        """Solve the window at step ``k``.  If later stages cannot stay inside the
        bounds the horizon is shortened to the feasible prefix; if even the first
        stage cannot, the viability boundary is dropped for this step."""
        win = self.window(k)
        while True:
            try:
                return dp_solve_horizon(self.arch, win, soc, prev_features, self.cfg)
            except (SocConstraintViolation, InfeasibleHorizon) as exc:
                s = exc_stage(exc)
                if s > 0:
                    win = win.head(s)
                elif win.soc_lo is not None:
                    win = win.relaxed()
                else:
                    raise


def horizon_steps(cfg, dt):
    return max(1, int(round(cfg.horizon / dt)))


def viability_bounds(battery, p_bat, valid, cfg, dt):
    """Per-sample SOC floor and ceiling (length ``n_steps + 1``) that keep the rest of the run feasible."""
    n = p_bat.shape[0]
    floor = np.full(n + 1, cfg.soc_min)
    ceiling = np.full(n + 1, cfg.soc_max)
    for k in range(n - 1, -1, -1):
        p = p_bat[k][valid[k]]
        if p.size == 0:
            continue
        ds = battery.dsoc(np.full(p.size, floor[k + 1]), p)
        ds = ds[np.isfinite(ds)]
        if ds.size:
            floor[k] = max(cfg.soc_min, floor[k + 1] - ds.max() * dt)
        ds = battery.dsoc(np.full(p.size, ceiling[k + 1]), p)
        ds = ds[np.isfinite(ds)]
        if ds.size:
            ceiling[k] = min(cfg.soc_max, ceiling[k + 1] - ds.min() * dt)
    return floor, ceiling


def exc_stage(exc):
    return getattr(exc, "stage", 0)


def mpc_step(arch, full_state, preview, cfg):
    """First control of the horizon solution: ``full_state = (soc, previous features)``."""
    soc, prev = full_state
    return dp_solve_horizon(arch, preview, soc, prev, cfg).controls[0]
