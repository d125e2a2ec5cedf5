"""Command-line entry point: ``erevsim {size,simulate,compare,plot,cycle}``.

Exit codes: 0 success, 1 usage or validation error, 2 infeasible request
(sizing, capability or SOC limits), 3 internal error.
"""
import argparse
import dataclasses
import sys
from pathlib import Path

from . import config as cfgmod
from . import cycles, sim, sizing
from .errors import (BatteryPowerLimitError, CapabilityError, ErevError, InfeasibleHorizon, InfeasibleModeError,
                     SimulationAbort, SizingInfeasible, SocConstraintViolation, ValidationError)
from .powertrain import KINDS, default_architecture

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3
INFEASIBLE = (SizingInfeasible, CapabilityError, InfeasibleHorizon, InfeasibleModeError, SocConstraintViolation,
              SimulationAbort, BatteryPowerLimitError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _arch_list(values):
    if not values:
        return None
    out = []
    for v in values:
        for part in v.split(","):
            k = part.strip().upper()
            if k not in KINDS:
                raise UsageError(f"unknown architecture {part!r}; choose from {', '.join(KINDS)}")
            out.append(k)
    return tuple(out)


def _load(args):
    cfg = cfgmod.load_config(args.config)
    cfg = cfg.override(
        archs=_arch_list(getattr(args, "arch", None)),
        cycle=getattr(args, "cycle", None),
        scenario=getattr(args, "scenario", None),
        soc_init=getattr(args, "soc_init", None),
        output=getattr(args, "out", None),
        workers=getattr(args, "workers", None),
    )
    ems = {k: v for k, v in (("horizon", getattr(args, "horizon", None)),
                             ("soc_grid_points", getattr(args, "soc_grid", None))) if v is not None}
    return dataclasses.replace(cfg, ems=dataclasses.replace(cfg.ems, **ems)) if ems else cfg


def _archs(cfg):
    components = cfg.components.build()
    return [default_architecture(k, components=components, vehicle=cfg.vehicle) for k in cfg.archs]


def _resolve_cycle(spec):
    try:
        return cycles.resolve_cycle(spec)
    except FileNotFoundError:
        raise ValidationError(f"cycle {spec!r} is neither a builtin ({', '.join(cfgmod.builtin_cycle_names())}) "
                              f"nor an existing file") from None


def _out_dir(cfg):
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_size(args, stdout):
    cfg = _load(args)
    report = sizing.size_all(cfg.sizing, cfg.vehicle, cfg.archs, cfg.components.motor_losses)
    text = report.to_csv() if args.format == "csv" else report.to_text()
    stdout.write(text)
    out = _out_dir(cfg)
    (out / "sizing.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "sizing.txt").write_text(report.to_text(), encoding="utf-8")
    return EXIT_OK


def cmd_simulate(args, stdout):
    cfg = _load(args)
    cycle = _resolve_cycle(cfg.cycle)
    out = _out_dir(cfg)
    for arch in _archs(cfg):
        trace = sim.simulate(arch, cycle, cfg.ems, cfg.scenario, cfg.soc_init)
        path = out / f"trace_{arch.kind}_{cycle.name}_{cfg.scenario}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            trace.to_csv(fh)
        ix = sim.performance_indexes(trace)
        stdout.write(f"{arch.kind} {cycle.name} {cfg.scenario}: EC {ix.EC:.4f} kWh  FC {ix.FC:.4f} dm3  "
                     f"HC {ix.HC:.4f} g  CO {ix.CO:.4f} g  NOx {ix.NOx:.4f} g  PM {ix.PM:.4f} g  "
                     f"SOC_end {ix.soc_final:.4f}  -> {path}\n")
    return EXIT_OK


def cmd_compare(args, stdout):
    cfg = _load(args)
    cycle = _resolve_cycle(cfg.cycle)
    scenarios = tuple(args.scenarios) if args.scenarios else (cfg.scenario,)
    soc_init = {s: cfg.soc_init for s in scenarios} if cfg.soc_init is not None else None
    report = sim.compare(_archs(cfg), cycle, scenarios, cfg.ems, soc_init, cfg.workers)
    text = report.to_csv() if args.format == "csv" else report.to_table()
    stdout.write(text)
    if args.out:
        out = _out_dir(cfg)
        (out / f"compare_{cycle.name}.csv").write_text(report.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_plot(args, stdout):
    from .plotting import plot_channels

    try:
        with open(args.trace, "rb") as fh:
            data = sim.read_trace_csv(fh)
    except FileNotFoundError:
        raise ValidationError(f"trace file {args.trace!r} not found") from None
    channels = [c.strip() for c in args.channels.split(",") if c.strip()]
    if not channels:
        raise UsageError("no channels given")
    out = Path(args.out or ".")
    for p in plot_channels(data, channels, out, stem=Path(args.trace).stem):
        stdout.write(f"{p}\n")
    return EXIT_OK


def cmd_cycle(args, stdout):
    if args.action == "list":
        for name in cfgmod.builtin_cycle_names():
            stdout.write(name + "\n")
        return EXIT_OK
    if not args.source:
        raise UsageError(f"cycle {args.action} needs a builtin name or CSV path")
    cyc = _resolve_cycle(args.source)
    if args.dt is not None:
        cyc = cycles.resample(cyc, args.dt)
    if args.action == "inspect":
        v = cyc.speed * 3.6
        idle = float((cyc.speed <= 1e-9).mean() * 100.0)
        stdout.write(f"name {cyc.name}\nsamples {len(cyc)}\ndt {cyc.dt:g} s\nduration {cyc.duration:g} s\n"
                     f"distance {cyc.distance() / 1000.0:.3f} km\nmean speed {cyc.mean_speed() * 3.6:.2f} km/h\n"
                     f"max speed {v.max():.2f} km/h\nmax |accel| {abs(cyc.step_accel()).max():.3f} m/s^2\n"
                     f"idle share {idle:.1f} %\n")
        return EXIT_OK
    if not args.dest:
        cycles.write_cycle(cyc, stdout)
    else:
        with open(args.dest, "w", encoding="utf-8", newline="\n") as fh:
            cycles.write_cycle(cyc, fh)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="erevsim", description="Extended-range electric bus sizing, energy management and simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, arch=True):
        sp.add_argument("--config", help=f"JSON run configuration (default: ${cfgmod.ENV_VAR})")
        sp.add_argument("--out", help="output directory")
        if arch:
            sp.add_argument("--arch", action="append", help="architecture(s): smsp, dmsp, dmpp (repeat or comma-separate)")

    def ems_flags(sp):
        sp.add_argument("--horizon", type=int, help="preview horizon in seconds")
        sp.add_argument("--soc-grid", type=int, dest="soc_grid", help="SOC nodes per optimiser stage")

    s = sub.add_parser("size", help="size motors and gear ratios and verify performance")
    common(s)
    s.add_argument("--format", choices=("table", "csv"), default="table")
    s.set_defaults(func=cmd_size)

    s = sub.add_parser("simulate", help="run one cycle per architecture and write traces")
    common(s)
    s.add_argument("--cycle", help="builtin cycle name or CSV path")
    s.add_argument("--scenario", choices=cfgmod.SCENARIOS)
    s.add_argument("--soc-init", type=float, dest="soc_init")
    ems_flags(s)
    s.add_argument("--seedless", action="store_true", help="accepted for compatibility; runs are always deterministic")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="compare performance indexes against the first architecture")
    common(s)
    s.add_argument("--cycle", help="builtin cycle name or CSV path")
    s.add_argument("--scenario", dest="scenarios", action="append", choices=cfgmod.SCENARIOS)
    s.add_argument("--soc-init", type=float, dest="soc_init")
    ems_flags(s)
    s.add_argument("--workers", type=int)
    s.add_argument("--format", choices=("table", "csv"), default="table")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("plot", help="plot trace channels to SVG")
    s.add_argument("trace", help="trace CSV written by simulate")
    s.add_argument("--channels", default="soc", help="comma-separated channel names")
    s.add_argument("--out", help="output directory (default: current directory)")
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("cycle", help="list, inspect or convert driving cycles")
    s.add_argument("action", choices=("list", "inspect", "convert"))
    s.add_argument("source", nargs="?", help="builtin cycle name or CSV path")
    s.add_argument("dest", nargs="?", help="output CSV for convert (default: stdout)")
    s.add_argument("--dt", type=float, help="resample to this step")
    s.set_defaults(func=cmd_cycle)
    return p


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, stdout)
    except UsageError as exc:
        stderr.write(f"erevsim: usage error: {exc}\n")
        return EXIT_USAGE
    except INFEASIBLE as exc:
        stderr.write(f"erevsim: infeasible: {exc}\n")
        return EXIT_INFEASIBLE
    except (ValidationError, LookupError, ValueError) as exc:
        stderr.write(f"erevsim: error: {exc}\n")
        return EXIT_USAGE
    except ErevError as exc:
        stderr.write(f"erevsim: error: {exc}\n")
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001 - last-resort report
        stderr.write(f"erevsim: internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
