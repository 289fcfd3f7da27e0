"""JSON run configuration with a strict, fixed schema.

Unknown keys are rejected, every value is type-checked and the invariants of
the domain objects are re-checked on load.  Errors carry the dotted path of
the offending field.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .controllers import BsflGains, CpssParams, DflGains
from .engine import ControllerKind, Event, EventKind, Scenario
from .model import MachineParams, OperatingPoint

__all__ = [
    "ConfigError",
    "LoadStep",
    "AnalysisSettings",
    "OutputSettings",
    "ScenarioConfig",
    "ControllerBlocks",
    "Config",
    "load_config",
    "parse_config",
    "bundled_config_path",
]


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class LoadStep:
    t: float = 1.0
    factor: float = 1.2
    duration: float = 10.0

    def __post_init__(self) -> None:
        if not self.factor > 0:
            raise ValueError("LoadStep violates factor > 0")
        if not 0 <= self.t < self.duration:
            raise ValueError("LoadStep violates 0 <= t < duration")


@dataclass(frozen=True)
class AnalysisSettings:
    band_frac: float = 0.02
    backswing_frac: float = 0.10
    cct_lo: float = 0.01
    cct_hi: float = 0.6
    cct_tol: float = 1e-3
    cct_horizon: float = 5.0

    def __post_init__(self) -> None:
        if not 0 < self.band_frac < 1:
            raise ValueError("AnalysisSettings violates 0 < band_frac < 1")
        if not 0 < self.backswing_frac < 1:
            raise ValueError("AnalysisSettings violates 0 < backswing_frac < 1")
        if not 0 < self.cct_lo < self.cct_hi:
            raise ValueError("AnalysisSettings violates 0 < cct_lo < cct_hi")
        if not self.cct_tol > 0:
            raise ValueError("AnalysisSettings violates cct_tol > 0")


@dataclass(frozen=True)
class OutputSettings:
    csv: str = "run.csv"
    summary: str = "summary.json"
    record_stride: int = 10

    def __post_init__(self) -> None:
        if self.record_stride < 1:
            raise ValueError("OutputSettings violates record_stride >= 1")


@dataclass(frozen=True)
class EventSpec:
    t: float
    kind: str
    factor: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    duration: float = 10.0
    dt: float = 1e-4
    controller: str = "bsfl"
    locate_switches: bool = True
    events: tuple[EventSpec, ...] = ()


@dataclass(frozen=True)
class ControllerBlocks:
    bsfl: BsflGains | None = None
    dfl: DflGains | None = None
    cpss: CpssParams | None = None


@dataclass(frozen=True)
class Config:
    machine: MachineParams = field(default_factory=MachineParams)
    operating_point: OperatingPoint = field(default_factory=OperatingPoint)
    controllers: ControllerBlocks = field(default_factory=ControllerBlocks)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    load_step: LoadStep = field(default_factory=LoadStep)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def gains_for(self, kind: ControllerKind, required: bool = True):
        if kind is ControllerKind.OPEN_LOOP:
            return None
        block = getattr(self.controllers, kind.value)
        if block is None and required:
            raise ConfigError(f"controllers.{kind.value}", "section is missing")
        return block

    def build_scenario(self, controller: ControllerKind | None = None, **overrides) -> Scenario:
        sc = self.scenario
        kind = controller or ControllerKind(sc.controller)
        events = tuple(Event(e.t, EventKind(e.kind), e.factor) for e in sc.events)
        args = dict(
            duration=sc.duration,
            dt=sc.dt,
            events=events,
            controller=kind,
            record_stride=self.output.record_stride,
            locate_switches=sc.locate_switches,
        )
        args.update(overrides)
        return Scenario(**args)

    def fault_events(self) -> tuple[float, float] | None:
        """``(t_fault, t_clear)`` of the first fault in the scenario."""
        start = next((e.t for e in self.scenario.events if e.kind == "apply_fault"), None)
        end = next((e.t for e in self.scenario.events if e.kind == "clear_fault"), None)
        if start is None or end is None:
            return None
        return start, end

    def to_dict(self) -> dict:
        return _dump(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- generic strict loader ----------------------------------------------------

_SCALARS = {float: (int, float), int: (int,), bool: (bool,), str: (str,)}


def _floats(cls) -> dict[str, Any]:
    return {f.name: float for f in dataclasses.fields(cls)}


_SCHEMA: dict[type, dict[str, Any]] = {
    MachineParams: _floats(MachineParams),
    OperatingPoint: _floats(OperatingPoint),
    BsflGains: _floats(BsflGains),
    DflGains: _floats(DflGains),
    CpssParams: {**_floats(CpssParams), "vref": (float, None)},
    LoadStep: _floats(LoadStep),
    AnalysisSettings: _floats(AnalysisSettings),
    OutputSettings: {"csv": str, "summary": str, "record_stride": int},
    EventSpec: {"t": float, "kind": str, "factor": float},
    ScenarioConfig: {
        "duration": float,
        "dt": float,
        "controller": str,
        "locate_switches": bool,
        "events": [EventSpec],
    },
    ControllerBlocks: {
        "bsfl": (BsflGains, None),
        "dfl": (DflGains, None),
        "cpss": (CpssParams, None),
    },
    Config: {
        "machine": MachineParams,
        "operating_point": OperatingPoint,
        "controllers": ControllerBlocks,
        "scenario": ScenarioConfig,
        "load_step": LoadStep,
        "analysis": AnalysisSettings,
        "output": OutputSettings,
    },
}


def _check_scalar(value, kind, path):
    if kind is not bool and isinstance(value, bool):
        raise ConfigError(path, f"expected {kind.__name__}, got boolean")
    if not isinstance(value, _SCALARS[kind]):
        raise ConfigError(path, f"expected {kind.__name__}, got {type(value).__name__}")
    return float(value) if kind is float else value


def _load(kind, value, path):
    if isinstance(kind, tuple):
        inner, _ = kind
        return None if value is None else _load(inner, value, path)
    if isinstance(kind, list):
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list")
        return tuple(_load(kind[0], v, f"{path}[{i}]") for i, v in enumerate(value))
    if kind in _SCALARS:
        return _check_scalar(value, kind, path)
    if not isinstance(value, dict):
        raise ConfigError(path, "expected an object")
    spec = _SCHEMA[kind]
    unknown = sorted(set(value) - set(spec))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(where, "unknown key")
    args = {}
    for name, sub in spec.items():
        if name in value:
            args[name] = _load(sub, value[name], f"{path}.{name}" if path else name)
    try:
        return kind(**args)
    except TypeError as exc:
        raise ConfigError(path, f"missing required field ({exc})") from None
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _dump(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _dump(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_dump(v) for v in obj]
    return obj


def _validate(cfg: Config) -> None:
    sc = cfg.scenario
    try:
        ControllerKind(sc.controller)
    except ValueError:
        choices = ", ".join(k.value for k in ControllerKind)
        raise ConfigError("scenario.controller", f"must be one of {choices}") from None
    for i, e in enumerate(sc.events):
        try:
            EventKind(e.kind)
        except ValueError:
            choices = ", ".join(k.value for k in EventKind)
            raise ConfigError(f"scenario.events[{i}].kind", f"must be one of {choices}") from None
        try:
            Event(e.t, EventKind(e.kind), e.factor)
        except ValueError as exc:
            raise ConfigError(f"scenario.events[{i}]", str(exc)) from None
        k = e.t / sc.dt
        if abs(k - round(k)) > 1e-6:
            raise ConfigError(f"scenario.events[{i}].t", f"{e.t} is not on the dt={sc.dt} grid")
    try:
        cfg.build_scenario()
    except ValueError as exc:
        raise ConfigError("scenario", str(exc)) from None
    ls = cfg.load_step
    if abs(ls.t / sc.dt - round(ls.t / sc.dt)) > 1e-6:
        raise ConfigError("load_step.t", f"{ls.t} is not on the dt={sc.dt} grid")


def parse_config(data: dict) -> Config:
    cfg = _load(Config, data, "")
    _validate(cfg)
    return cfg


def load_config(path) -> Config:
    """Read and validate a config file; raises ``ConfigError`` or ``OSError``."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    return parse_config(data)


def bundled_config_path() -> Path:
    return Path(str(resources.files("smibpss") / "data" / "paper_table1.json"))
