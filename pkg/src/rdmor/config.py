"""Experiment configuration: INI-style sections, strict keys, presets and hashing.

Example::

    [model]
    name = schnakenberg
    d_u = 1.0
    d_v = 10.0
    a = 0.1
    b = 0.9
    gamma = 1000.0

    [grid]
    L_x = 1.0
    ...

Unknown sections or keys raise :class:`ConfigError` naming the offending
field.  Floats are written with ``repr`` so that parse, serialize, parse is
the identity.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .discretization import Grid
from .errors import ConfigError, RdmorError
from .full_solver import TimeGrid
from .kinetics import PARAMETER_NAMES, ModelName, build_model

__all__ = [
    "ModelSection",
    "GridSection",
    "TimeSection",
    "InitSection",
    "MorSection",
    "AdaptiveSection",
    "OutputSection",
    "ExperimentConfig",
    "parse_r_values",
    "load_config",
    "PRESETS",
    "preset",
]


def parse_r_values(text: str, R: int | None = None) -> list:
    """``"1-20,25,30"`` style lists; ``"all"`` expands to ``1..R``."""
    text = text.strip()
    if text == "all":
        if R is None:
            raise ConfigError("mor.r_values", "'all' needs a known R")
        return list(range(1, R + 1))
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                if lo > hi:
                    raise ValueError
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError("mor.r_values", f"cannot parse {part!r}") from None
    if not out or min(out) < 1:
        raise ConfigError("mor.r_values", "need positive integers")
    return sorted(set(out))


@dataclass(frozen=True)
class ModelSection:
    name: str = "schnakenberg"
    d_u: float = 1.0
    d_v: float = 10.0
    params: tuple = ()  # sorted (key, value) pairs

    def build(self):
        try:
            return build_model(self.name, self.d_u, self.d_v, **dict(self.params))
        except RdmorError as exc:
            raise ConfigError("model", str(exc)) from exc


@dataclass(frozen=True)
class GridSection:
    L_x: float = 1.0
    L_y: float = 1.0
    n_x: int = 50
    n_y: int = 50

    def build(self) -> Grid:
        return Grid(self.L_x, self.L_y, self.n_x, self.n_y)


@dataclass(frozen=True)
class TimeSection:
    T: float = 2.0
    h_t: float = 1e-4
    stride: int = 4
    tau_t_min: float = 0.0

    def build(self) -> TimeGrid:
        return TimeGrid(self.T, self.h_t)


@dataclass(frozen=True)
class InitSection:
    seed: int = 42
    amplitude: float = 1e-5


@dataclass(frozen=True)
class MorSection:
    r_values: str = "all"
    R: int | None = None
    ell: int | None = None
    methods: str = "pod,podc,pod-deim,pod-deimc"
    memory_budget_mb: int = 512
    workers: int = 1

    @property
    def method_list(self) -> list:
        return [m.strip() for m in self.methods.split(",") if m.strip()]


@dataclass(frozen=True)
class AdaptiveSection:
    enabled: bool = False
    r1: int = 10
    R1: int | None = None
    R2: int | None = None
    ell1: int | None = None
    ell2: int | None = None
    zone1_stride: int | None = None
    zone2_start: str = "transfer"
    zone1_method: str | None = None


@dataclass(frozen=True)
class OutputSection:
    directory: str = "runs"


_SECTIONS = {
    "model": ModelSection,
    "grid": GridSection,
    "time": TimeSection,
    "init": InitSection,
    "mor": MorSection,
    "adaptive": AdaptiveSection,
    "output": OutputSection,
}

_SIMULATION_SECTIONS = ("model", "grid", "time", "init")


def _field_type(cls, name):
    hints = {f.name: f.type for f in fields(cls)}
    return hints[name]


def _convert(section, key, raw: str, type_str: str):
    raw = raw.strip()
    optional = "None" in type_str
    if optional and raw.lower() in ("", "none", "auto"):
        return None
    base = type_str.replace("| None", "").strip()
    try:
        if base == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if base == "int":
            return int(raw)
        if base == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        return raw
    except ValueError:
        raise ConfigError(f"{section}.{key}", f"expected {base}, got {raw!r}") from None


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    grid: GridSection = field(default_factory=GridSection)
    time: TimeSection = field(default_factory=TimeSection)
    init: InitSection = field(default_factory=InitSection)
    mor: MorSection = field(default_factory=MorSection)
    adaptive: AdaptiveSection = field(default_factory=AdaptiveSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------
    def validate(self):
        try:
            ModelName(self.model.name)
        except ValueError:
            raise ConfigError("model.name", f"unknown model {self.model.name!r}") from None
        allowed = set(PARAMETER_NAMES[ModelName(self.model.name)])
        for key, _ in self.model.params:
            if key not in allowed:
                raise ConfigError(f"model.{key}", f"not a parameter of {self.model.name}")
        self.model.build()
        if self.grid.n_x < 2 or self.grid.n_y < 2:
            raise ConfigError("grid.n_x", "need at least 2 points per direction")
        if self.grid.L_x <= 0 or self.grid.L_y <= 0:
            raise ConfigError("grid.L_x", "domain lengths must be positive")
        if self.time.stride < 1:
            raise ConfigError("time.stride", "must be >= 1")
        if self.time.h_t <= 0 or self.time.T <= 0:
            raise ConfigError("time.h_t", "T and h_t must be positive")
        if self.init.amplitude < 0:
            raise ConfigError("init.amplitude", "must be nonnegative")
        if self.mor.r_values != "all":
            rs = parse_r_values(self.mor.r_values)
            if self.mor.R is not None and max(rs) > self.mor.R:
                raise ConfigError("mor.r_values", f"r={max(rs)} exceeds R={self.mor.R}")
        for name, val in (("mor.R", self.mor.R), ("mor.ell", self.mor.ell), ("adaptive.R1", self.adaptive.R1),
                          ("adaptive.R2", self.adaptive.R2), ("adaptive.ell1", self.adaptive.ell1),
                          ("adaptive.ell2", self.adaptive.ell2), ("adaptive.zone1_stride", self.adaptive.zone1_stride)):
            if val is not None and val < 1:
                raise ConfigError(name, "must be >= 1")
        if self.adaptive.R1 is not None and self.adaptive.r1 >= self.adaptive.R1:
            raise ConfigError("adaptive.r1", "need r1 < R1")
        known = {"pod", "podc", "pod-deim", "pod-deimc"}
        for m in self.mor.method_list:
            if m not in known:
                raise ConfigError("mor.methods", f"unknown method {m!r}")
        if self.adaptive.zone1_method is not None and self.adaptive.zone1_method not in known:
            raise ConfigError("adaptive.zone1_method", f"unknown method {self.adaptive.zone1_method!r}")
        if self.adaptive.zone2_start not in ("transfer", "snapshot"):
            raise ConfigError("adaptive.zone2_start", "must be 'transfer' or 'snapshot'")
        if self.mor.memory_budget_mb < 1 or self.mor.workers < 1:
            raise ConfigError("mor.memory_budget_mb", "memory budget and workers must be >= 1")

    # -- conversion ---------------------------------------------------------
    @classmethod
    def from_string(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # parameter names are case sensitive (A1, B, ...)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("file", str(exc).splitlines()[0]) from None
        kwargs = {}
        for section in cp.sections():
            if section not in _SECTIONS:
                raise ConfigError(section, "unknown section")
            scls = _SECTIONS[section]
            names = {f.name for f in fields(scls)}
            values, params = {}, {}
            for key, raw in cp.items(section):
                if section == "model" and key not in names:
                    params[key] = _convert(section, key, raw, "float")
                    continue
                if key not in names or key == "params":
                    raise ConfigError(f"{section}.{key}", "unknown key")
                values[key] = _convert(section, key, raw, _field_type(scls, key))
            if section == "model":
                values["params"] = tuple(sorted(params.items()))
            kwargs[section] = scls(**values)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_string(Path(path).read_text())

    def to_string(self) -> str:
        lines = []
        for name in _SECTIONS:
            sec = getattr(self, name)
            lines.append(f"[{name}]")
            for f in fields(sec):
                if f.name == "params":
                    for key, val in sec.params:
                        lines.append(f"{key} = {_format(val)}")
                else:
                    lines.append(f"{f.name} = {_format(getattr(sec, f.name))}")
            lines.append("")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        out = {}
        for name in _SECTIONS:
            d = dataclasses.asdict(getattr(self, name))
            if name == "model":
                d["params"] = dict(d["params"])
            out[name] = d
        return out

    # -- hashing and overrides ----------------------------------------------
    def _digest(self, sections) -> str:
        text = "\n".join(f"{name}:{_canonical(getattr(self, name))}" for name in sections)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @property
    def hash(self) -> str:
        """Digest of every section except the output location."""
        return self._digest([s for s in _SECTIONS if s != "output"])

    @property
    def simulation_hash(self) -> str:
        """Digest of the sections that determine the full-order run."""
        return self._digest(_SIMULATION_SECTIONS)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, init=replace(self.init, seed=int(seed)))

    def with_output(self, directory) -> "ExperimentConfig":
        return replace(self, output=replace(self.output, directory=str(directory)))

    def build_model(self):
        return self.model.build()


def _canonical(sec) -> str:
    parts = []
    for f in fields(sec):
        val = getattr(sec, f.name)
        if f.name == "params":
            parts.extend(f"{k}={_format(v)}" for k, v in val)
        else:
            parts.append(f"{f.name}={_format(val)}")
    return ";".join(parts)


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_file(path)


def _cfg(model, grid, time, init, mor=None, adaptive=None):
    return ExperimentConfig(model=model, grid=grid, time=time, init=init, mor=mor or MorSection(),
                            adaptive=adaptive or AdaptiveSection())


_SCHNAK_MODEL = ModelSection("schnakenberg", 1.0, 10.0, (("a", 0.1), ("b", 0.9), ("gamma", 1000.0)))
_FHN_MODEL = ModelSection("fhn", 1.0, 42.1887, (("alpha", 0.1), ("beta", 11.0), ("gamma", 65.731)))
_DIB_MODEL = ModelSection("dib", 1.0, 20.0, (
    ("A1", 10.0), ("A2", 1.0), ("B", 66.0), ("C", 3.0), ("alpha", 0.5), ("gamma", 0.2),
    ("k2", 2.5), ("k3", 1.5), ("rho", 6.25),
))

#: Desk-scale presets (seconds to minutes on one core) and full-scale ones.
PRESETS = {
    "schnakenberg": _cfg(
        _SCHNAK_MODEL, GridSection(1.0, 1.0, 50, 50), TimeSection(2.0, 1e-4, 4), InitSection(42, 1e-5),
        adaptive=AdaptiveSection(True, 10, 35, 15, 50, 14),
    ),
    "fhn": _cfg(
        _FHN_MODEL, GridSection(math.pi, math.pi, 50, 50), TimeSection(50.0, 1e-4, 100, 5.0),
        InitSection(42, 1e-3),
        adaptive=AdaptiveSection(True, 10, 45, 12, 50, 13),
    ),
    "dib": _cfg(
        _DIB_MODEL, GridSection(20.0, 20.0, 64, 64), TimeSection(60.0, 1e-3, 16), InitSection(42, 1e-5),
        MorSection(R=80),
        adaptive=AdaptiveSection(True, 10, 41, 150, 60, 324, zone1_stride=8),
    ),
}

FULL_SCALE_PRESETS = {
    "schnakenberg": PRESETS["schnakenberg"],
    "fhn": _cfg(
        _FHN_MODEL, GridSection(math.pi, math.pi, 100, 100), TimeSection(50.0, 1e-4, 4, 5.0),
        InitSection(42, 1e-3), MorSection(R=45, ell=48),
        adaptive=AdaptiveSection(True, 10, 45, 12, 50, 13),
    ),
    "dib": _cfg(
        _DIB_MODEL, GridSection(20.0, 20.0, 100, 100), TimeSection(100.0, 1e-3, 4), InitSection(42, 1e-5),
        MorSection(R=200, ell=363),
        adaptive=AdaptiveSection(True, 10, 41, 150, 60, 324, zone1_stride=2),
    ),
}


def preset(name: str, full_scale: bool = False) -> ExperimentConfig:
    table = FULL_SCALE_PRESETS if full_scale else PRESETS
    try:
        return table[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(table)}") from None
