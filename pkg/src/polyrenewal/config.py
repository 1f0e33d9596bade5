"""Experiment configuration: JSON files, environment overrides and hashing."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import ConfigInvalid

ENV_PREFIX = "POLYRENEWAL_"


@dataclass
class ModelConfig:
    steps: str = "srw2d"
    law: str = "traps-0.8"
    beta: float | None = None
    h: list = field(default_factory=lambda: [2.0, 0.0])
    lam: float | None = None


@dataclass
class EngineConfig:
    n: int = 10
    table_n: int = 12
    ladder: list = field(default_factory=lambda: [4, 8, 12])
    exact: bool = True
    chains: int = 20000
    kernel: str = "srw1d"
    piece_cap: int = 8
    deltas: list = field(default_factory=lambda: [0.1, 0.2, 0.3])
    directions: int = 720
    alpha: float = 0.5
    pieces: int = 4
    enumeration_cap: int = 10**7
    tolerance: float = 1e-10


@dataclass
class RunConfig:
    seed: int = 0
    seeds: int = 100
    threads: int = 1
    out: str = "runs/latest"


MODEL_PRESETS = {
    "traps-half": {"steps": "srw1d", "law": "traps-half", "beta": None, "h": [0.0]},
    "supercritical-2d": {"steps": "srw2d", "law": "traps-0.8", "beta": None, "h": [2.0, 0.0]},
    "weak-2d": {"steps": "srw2d", "law": "two-point", "beta": 0.2, "h": [1.0, 0.0]},
    "strong-2d": {"steps": "srw2d", "law": "traps-0.6", "beta": None, "h": [1.5, 0.0]},
}


def apply_model_preset(cfg: "ExperimentConfig", name: str) -> None:
    if name not in MODEL_PRESETS:
        raise ConfigInvalid(f"unknown model preset {name!r}; have {sorted(MODEL_PRESETS)}")
    for key, value in MODEL_PRESETS[name].items():
        cfg.set("model", key, value)
    cfg.model.lam = None


# Execution settings that never change results; excluded from the identity.
EXECUTION_KEYS = {("run", "threads"), ("run", "out")}


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    run: RunConfig = field(default_factory=RunConfig)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        cfg = cls()
        if not isinstance(data, Mapping):
            raise ConfigInvalid("configuration must be a JSON object")
        for block, values in data.items():
            if block not in ("model", "engine", "run"):
                raise ConfigInvalid(f"unknown block {block!r}")
            if not isinstance(values, Mapping):
                raise ConfigInvalid(f"block {block!r} must be an object")
            for key, value in values.items():
                cfg.set(block, key, value)
        return cfg

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def set(self, block: str, key: str, value: Any) -> None:
        section = getattr(self, block)
        names = {f.name: f for f in dataclasses.fields(section)}
        if key not in names:
            raise ConfigInvalid(f"unknown key {block}.{key}")
        setattr(section, key, _coerce(block, key, value, getattr(section, key)))

    def apply_env(self, environ: Mapping[str, str] | None = None) -> None:
        """``POLYRENEWAL_SEED``, ``POLYRENEWAL_SEEDS`` and ``POLYRENEWAL_OUT``."""
        environ = os.environ if environ is None else environ
        for key in ("seed", "seeds", "out"):
            name = ENV_PREFIX + key.upper()
            if name in environ:
                self.set("run", key, environ[name])

    def to_dict(self, identity: bool = False) -> dict:
        out = dataclasses.asdict(self)
        if identity:
            for block, key in EXECUTION_KEYS:
                out[block].pop(key, None)
        return out

    def digest(self) -> str:
        text = json.dumps(self.to_dict(identity=True), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _coerce(block: str, key: str, value: Any, current: Any) -> Any:
    where = f"{block}.{key}"
    if value is None:
        if key in ("beta", "lam"):
            return None
        raise ConfigInvalid(f"{where} may not be null")
    try:
        if isinstance(current, bool):
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(value)
                return value.lower() in ("true", "1")
            return bool(value)
        if isinstance(current, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(current, float) or key in ("beta", "lam"):
            return float(value)
        if isinstance(current, list):
            if isinstance(value, str):
                value = [float(v) if "." in v or "e" in v else int(v) for v in value.split(",")]
            if not isinstance(value, (list, tuple)):
                raise ValueError(value)
            return list(value)
        if isinstance(current, str):
            if not isinstance(value, str):
                raise ValueError(value)
            return value
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad value for {where}: {value!r}") from exc
    raise ConfigInvalid(f"cannot set {where}")
