"""Scenario configuration: INI-style ``key = value`` sections, or JSON.

::

    [scenario]
    id = chameleon
    seed = 7
    tolerance = 1e-12
    format = json

    [parameters]
    n = 100000
    b = pi/4

    [output]
    out_dir = runs/chameleon
    figures = false

Unknown sections or keys are rejected. Every value not given takes its
default, and :func:`dumps_config` echoes the fully resolved config.
"""

from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

SCENARIO_IDS = ("inequalities", "feasibility", "singlet-scan", "chameleon", "nonlocal-demo", "coincidence")

# Parameter defaults per scenario; the default's type is the parameter's type.
PARAMETER_DEFAULTS: dict[str, dict[str, object]] = {
    "inequalities": {"samples": 100000, "lattice": True},
    "feasibility": {"family": "0,1/2,1/2", "sweep": 0},
    "singlet-scan": {"n": 101, "a": "0", "b": "pi/4", "c": "pi/2", "chsh_resolution": 360},
    "chameleon": {
        "a": "0",
        "b": "pi/4",
        "c": "pi/2",
        "n": 100000,
        "repetitions": 5,
        "hidden": "circle",
        "probe_settings": 16,
        "probe_lambdas": 1000,
        "substitutions": "pi/2,pi/8,3pi/4",
    },
    "nonlocal-demo": {"directions": "0,pi/4,pi/2"},
    "coincidence": {"k": "1,2,4,10", "trials": 100000},
}

GLOBAL_DEFAULTS = {"seed": 0, "tolerance": 1e-12, "format": "json"}
OUTPUT_DEFAULTS = {"out_dir": "bellkit-out", "figures": False}


class ConfigError(ValueError):
    """Unreadable, unknown or ill-typed configuration."""


_ANGLE = re.compile(r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(text) -> float:
    """``"pi/4"``, ``"3pi/4"``, ``"-pi"`` or a plain number of radians."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _ANGLE.match(str(text))
    if m:
        coef = m.group(1)
        coef = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
        denom = float(m.group(2)) if m.group(2) else 1.0
        return coef * math.pi / denom
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not an angle: {text!r}") from None


def parse_angles(text: str) -> list[float]:
    return [parse_angle(t) for t in str(text).split(",") if t.strip()]


def parse_ints(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"not a list of integers: {text!r}") from None


def _coerce(key: str, value, default):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        s = str(value).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if isinstance(default, int):
        try:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(str(value).strip()) if not isinstance(value, (int, float)) else int(value)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if isinstance(default, float):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    return str(value).strip()


@dataclass
class ScenarioConfig:
    scenario: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    tolerance: float = 1e-12
    format: str = "json"
    out_dir: str = "bellkit-out"
    figures: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIO_IDS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIO_IDS)}")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {self.format!r}")
        if self.tolerance < 0:
            raise ConfigError("tolerance must be nonnegative")
        defaults = PARAMETER_DEFAULTS[self.scenario]
        unknown = sorted(set(self.parameters) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown parameters for {self.scenario}: {', '.join(unknown)}")
        self.parameters = {k: _coerce(k, self.parameters.get(k, d), d) for k, d in defaults.items()}

    def resolved(self) -> dict:
        """Inputs that determine the report (output locations excluded)."""
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "format": self.format,
            "parameters": dict(self.parameters),
        }


def from_mapping(data: dict) -> ScenarioConfig:
    """Build a config from ``{"scenario": {...}, "parameters": {...}, "output": {...}}``."""
    unknown = sorted(set(data) - {"scenario", "parameters", "output"})
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")
    scen = dict(data.get("scenario", {}))
    out = dict(data.get("output", {}))
    bad = sorted(set(scen) - {"id", *GLOBAL_DEFAULTS}) + sorted(set(out) - set(OUTPUT_DEFAULTS))
    if bad:
        raise ConfigError(f"unknown keys: {', '.join(bad)}")
    if "id" not in scen:
        raise ConfigError("missing [scenario] id")
    g = {k: _coerce(k, scen.get(k, d), d) for k, d in GLOBAL_DEFAULTS.items()}
    o = {k: _coerce(k, out.get(k, d), d) for k, d in OUTPUT_DEFAULTS.items()}
    return ScenarioConfig(str(scen["id"]), dict(data.get("parameters", {})), **g, **o)


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            return from_mapping(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON in {path}: {exc}") from None
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"bad config {path}: {exc}") from None
    return from_mapping({name: dict(parser[name]) for name in parser.sections()})


def dumps_config(cfg: ScenarioConfig) -> str:
    """Echo a resolved config as INI text that :func:`load_config` reads back."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["scenario"] = {"id": cfg.scenario, "seed": str(cfg.seed), "tolerance": repr(cfg.tolerance),
                          "format": cfg.format}
    parser["parameters"] = {k: _ini(v) for k, v in cfg.parameters.items()}
    parser["output"] = {"out_dir": cfg.out_dir, "figures": _ini(cfg.figures)}
    lines = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in parser[section].items())
        lines.append("")
    return "\n".join(lines)


def _ini(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)
