"""Run configuration: strict JSON validation, presets and hashing.

One config file drives one run. Unknown keys are rejected and missing
required fields are reported by their dotted path, so a typo fails before
any compute starts.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources

from .artifacts import config_hash
from .detection import DETECTION_METHODS
from .envs import KINDS
from .regularizer import RegConfig
from .training import TrainConfig


@dataclass
class EnvConfig:
    kind: str = ""
    mask_opponent: bool = False
    pong: dict = field(default_factory=dict)   # PongEnv physics overrides

    def validate(self) -> None:
        if not self.kind:
            raise ValueError("missing required field env.kind")
        if self.kind not in KINDS:
            raise ValueError(f"env.kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind != "pong" and (self.mask_opponent or self.pong):
            raise ValueError("env.mask_opponent / env.pong only apply to pong")

    def options(self) -> dict:
        if self.kind != "pong":
            return {}
        return {"mask_opponent": self.mask_opponent, **self.pong}


@dataclass
class DetectConfig:
    method: str = "ft_internal"
    episodes: int = 200      # trace episodes
    seed: int = 0

    def validate(self) -> None:
        if self.method not in DETECTION_METHODS:
            raise ValueError(
                f"detect.method must be one of {DETECTION_METHODS}, "
                f"got {self.method!r}")
        if self.episodes < 1:
            raise ValueError("detect.episodes must be >= 1")


@dataclass
class InterveneConfig:
    episodes: int = 2000
    seed: int = 0
    saturation_value: float = -50.0
    include_incident: bool = False

    def validate(self) -> None:
        if self.episodes < 1:
            raise ValueError("intervene.episodes must be >= 1")


@dataclass
class EvalConfig:
    episodes: int = 300
    seed: int = 9999

    def validate(self) -> None:
        if self.episodes < 1:
            raise ValueError("eval.episodes must be >= 1")


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    reg: RegConfig = field(default_factory=RegConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)
    intervene: InterveneConfig = field(default_factory=InterveneConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    out_dir: str = "runs/run"
    seeds: list[int] = field(default_factory=lambda: [0])

    def validate(self) -> None:
        self.env.validate()
        self.train.validate()
        self.reg.validate()
        self.detect.validate()
        self.intervene.validate()
        self.eval.validate()
        if not self.seeds:
            raise ValueError("seeds must list at least one seed")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        # the hash identifies what determines results; where they are
        # written does not belong in it
        d = self.to_dict()
        d.pop("out_dir")
        return config_hash(d)


_NESTED = {"env": EnvConfig, "train": TrainConfig, "reg": RegConfig,
           "detect": DetectConfig, "intervene": InterveneConfig,
           "eval": EvalConfig}


def _coerce(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ValueError(f"{path or 'config'} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in fields:
            where = f"{path}.{key}" if path else key
            raise ValueError(f"unknown field {where}")
    defaults = cls()
    kwargs = {}
    for name in fields:
        if name not in data:
            continue
        value = data[name]
        sub = f"{path}.{name}" if path else name
        if cls is RunConfig and name in _NESTED:
            kwargs[name] = _coerce(_NESTED[name], value, sub)
        else:
            kwargs[name] = _check_scalar(name, value, sub,
                                         getattr(defaults, name))
    return cls(**kwargs)


def _check_scalar(name, value, path, default):
    """Shape/type checks against the field's default; ranges are checked
    later by each section's validate()."""
    if name in ("seeds",):
        if not isinstance(value, list) or not all(
                isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ValueError(f"{path} must be a list of ints")
        return list(value)
    if name == "hidden":
        if not isinstance(value, list) or not all(
                isinstance(v, int) and not isinstance(v, bool) and v > 0
                for v in value):
            raise ValueError(f"{path} must be a list of positive ints")
        return list(value)
    if name == "pong":
        if not isinstance(value, dict):
            raise ValueError(f"{path} must be an object")
        return dict(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValueError(f"{path} must be a boolean")
        return value
    if isinstance(default, int):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValueError(f"{path} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"{path} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ValueError(f"{path} must be a string")
        return value
    raise ValueError(f"{path} has unsupported value type {type(value).__name__}")


def run_config_from_dict(data: dict) -> RunConfig:
    cfg = _coerce(RunConfig, data, "")
    cfg.validate()
    return cfg


def run_config_from_file(path: str) -> RunConfig:
    with open(path) as f:
        data = json.load(f)
    return run_config_from_dict(data)


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=value`` overrides onto a raw config dict."""
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not KEY=VALUE")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ValueError(f"cannot override through non-object {p!r}")
        node[parts[-1]] = value
    return data


def list_presets() -> list[str]:
    files = resources.files("modrl").joinpath("presets")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    files = resources.files("modrl").joinpath("presets")
    path = files.joinpath(f"{name}.json")
    if not path.is_file():
        raise ValueError(f"unknown preset {name!r}; available: {list_presets()}")
    return json.loads(path.read_text())
