"""Strict JSON run configuration.

Every block maps onto a frozen dataclass; unknown keys and ill-typed values fail
with the dotted path of the offending entry.
"""
import json
import os
from dataclasses import dataclass, field, fields, replace

from . import components as comp
from .cycles import BUILTIN_CYCLES
from .ems import EmsConfig
from .errors import ConfigError, ValidationError
from .powertrain import KINDS, ControlGrid
from .sizing import SizingRequirements
from .vehicle import VehicleParams

ENV_VAR = "EREV_SIM_CONFIG"
SCENARIOS = ("electric", "hybrid")
LOSS_KEYS = tuple(f.name for f in fields(comp.LossCoefficients))


@dataclass(frozen=True)
class ComponentOptions:
    eta_c: float = 0.95
    motor_losses: dict = field(default_factory=dict)  # motor name -> LossCoefficients
    generator_losses: comp.LossCoefficients = None

    def build(self):
        return comp.default_components(motor_losses=self.motor_losses, generator_losses=self.generator_losses,
                                       eta_c=self.eta_c)


@dataclass(frozen=True)
class RunConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    components: ComponentOptions = field(default_factory=ComponentOptions)
    sizing: SizingRequirements = field(default_factory=SizingRequirements)
    ems: EmsConfig = field(default_factory=EmsConfig)
    cycle: str = "cbdc-synthetic"
    scenario: str = "hybrid"
    archs: tuple = KINDS
    soc_init: float = None
    output: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: expected one of {SCENARIOS}, got {self.scenario!r}")
        if not self.archs or any(a not in KINDS for a in self.archs):
            raise ConfigError(f"archs: expected a non-empty subset of {KINDS}, got {list(self.archs)}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")

    def override(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    return float(v)


def _block(cls, data, path, special=None):
    """Build dataclass ``cls`` from a dict; ``special`` maps field name -> parser."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    special = special or {}
    known = {f.name: f for f in fields(cls)}
    kw = {}
    for key, value in data.items():
        sub = f"{path}.{key}"
        if key not in known:
            raise ConfigError(f"{sub}: unknown key (valid: {', '.join(sorted(known))})")
        if key in special:
            kw[key] = special[key](value, sub)
        elif isinstance(known[key].default, int) and not isinstance(known[key].default, bool):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{sub}: expected an integer, got {value!r}")
            kw[key] = value
        else:
            kw[key] = _number(value, sub)
    try:
        return cls(**kw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _losses(value, path):
    return _block(comp.LossCoefficients, value, path)


def _motor_losses(value, path):
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object")
    out = {}
    for name, coeffs in value.items():
        if name not in comp.MOTOR_LOSSES:
            raise ConfigError(f"{path}.{name}: unknown motor (valid: {', '.join(sorted(comp.MOTOR_LOSSES))})")
        out[name] = _losses(coeffs, f"{path}.{name}")
    return out


def _string(choices=None):
    def parse(value, path):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        if choices is not None and value not in choices:
            raise ConfigError(f"{path}: expected one of {tuple(choices)}, got {value!r}")
        return value
    return parse


def _archs(value, path):
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of architectures")
    out = []
    for i, v in enumerate(value):
        if not isinstance(v, str) or v.upper() not in KINDS:
            raise ConfigError(f"{path}[{i}]: expected one of {KINDS}, got {v!r}")
        out.append(v.upper())
    return tuple(out)


def _optional_number(value, path):
    return None if value is None else _number(value, path)


def _int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def parse_config(data):
    """Build a :class:`RunConfig` from decoded JSON."""
    return _block(RunConfig, data, "config", {
        "vehicle": lambda v, p: _block(VehicleParams, v, p),
        "components": lambda v, p: _block(ComponentOptions, v, p, {
            "eta_c": _number, "motor_losses": _motor_losses, "generator_losses": _losses}),
        "sizing": lambda v, p: _block(SizingRequirements, v, p),
        "ems": lambda v, p: _block(EmsConfig, v, p, {"grid": lambda g, q: _block(ControlGrid, g, q)}),
        "cycle": _string(),
        "scenario": _string(SCENARIOS),
        "archs": _archs,
        "soc_init": _optional_number,
        "output": _string(),
        "workers": _int,
    })


def load_config(path=None):
    """Read ``path``, else the file named by ``EREV_SIM_CONFIG``, else defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(data)


def builtin_cycle_names():
    return sorted(BUILTIN_CYCLES)
