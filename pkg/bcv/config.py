"""
Typed configuration for selection runs and simulation experiments.

Values are layered lowest to highest: dataclass defaults, environment
(.env via python-dotenv at the entry points), command-line flags, then the
JSON config file.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from bcv.errors import ConfigError

logger = logging.getLogger(__name__)

SPLIT_MODES = ("kfold", "bernoulli")
PENALTY_FORMS = ("sqrt-min", "log")
SETTING_IDS = ("balanced-1", "balanced-2", "balanced-3", "poly-1", "poly-2", "custom")
BALANCE_MODES = ("balanced", "unbalanced")
METHODS = ("bcv", "projection", "bimodularity")


def _reject_unknown(cls, data: Mapping[str, Any]) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")


@dataclass(frozen=True)
class BcvConfig:
    mode: str = "kfold"
    folds: int = 10
    w: float = 0.9
    replications: int = 1
    repeats: int | None = None
    C: float = 0.01
    penalty_form: str = "sqrt-min"
    patience: int | None = 3
    restarts: int = 10
    seed: int = 0
    max_frontier: int | None = None
    d_rule: str = "product"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in SPLIT_MODES:
            raise ConfigError(f"mode must be one of {SPLIT_MODES}, got {self.mode!r}")
        if int(self.folds) < 2:
            raise ConfigError(f"folds must be at least 2, got {self.folds}")
        if not 0.0 < float(self.w) < 1.0:
            raise ConfigError(f"w must lie in (0, 1), got {self.w}")
        if self.penalty_form not in PENALTY_FORMS:
            raise ConfigError(f"penalty_form must be one of {PENALTY_FORMS}, got {self.penalty_form!r}")
        if float(self.C) <= 0:
            raise ConfigError(f"C must be positive, got {self.C}")
        for name in ("replications", "repeats", "restarts", "workers"):
            if getattr(self, name) is not None and int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")

        patience = self.patience
        if patience is not None and (isinstance(patience, float) and math.isinf(patience)):
            patience = None
        if patience is not None and int(patience) < 1:
            raise ConfigError(f"patience must be at least 1, got {patience}")
        object.__setattr__(self, "patience", None if patience is None else int(patience))

        if self.max_frontier is not None and int(self.max_frontier) < 1:
            raise ConfigError(f"max_frontier must be at least 1, got {self.max_frontier}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> BcvConfig:
        _reject_unknown(cls, data)
        return cls(**dict(data))

    @property
    def training_proportion(self) -> float:
        """w used in the 1/w inflation: 1 - 1/folds under K-fold."""
        return 1.0 - 1.0 / self.folds if self.mode == "kfold" else float(self.w)

    def merged(self, **overrides: Any) -> BcvConfig:
        given = {k: v for k, v in overrides.items() if v is not None}
        _reject_unknown(type(self), given)
        return replace(self, **given)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ExperimentConfig:
    setting: str = "balanced-1"
    r: float = 0.05
    sizes: tuple[int, ...] = (300,)
    balance: str = "balanced"
    reps: int = 20
    methods: tuple[str, ...] = ("bcv",)
    seed: int = 0
    output: str | None = None
    workers: int = 1
    custom: dict[str, Any] | None = None
    bcv: BcvConfig = field(default_factory=BcvConfig)

    def __post_init__(self):
        if self.setting not in SETTING_IDS:
            raise ConfigError(f"unknown setting {self.setting!r}; expected one of {SETTING_IDS}")
        if self.balance not in BALANCE_MODES:
            raise ConfigError(f"balance must be one of {BALANCE_MODES}, got {self.balance!r}")
        sizes = tuple(int(n) for n in self.sizes)
        if self.setting != "custom" and (not sizes or min(sizes) < 1):
            raise ConfigError("size grid must be nonempty and positive")
        object.__setattr__(self, "sizes", sizes)
        if int(self.reps) < 1:
            raise ConfigError(f"reps must be at least 1, got {self.reps}")
        methods = tuple(self.methods)
        bad = [m for m in methods if m not in METHODS]
        if bad or not methods:
            raise ConfigError(f"methods must be a nonempty subset of {METHODS}, got {methods}")
        object.__setattr__(self, "methods", methods)
        if self.setting == "custom" and not self.custom:
            raise ConfigError("setting 'custom' needs a 'custom' block with B, pi1, pi2, n1, n2")
        if isinstance(self.bcv, Mapping):
            object.__setattr__(self, "bcv", BcvConfig.from_dict(self.bcv))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ExperimentConfig:
        _reject_unknown(cls, data)
        values = dict(data)
        if "bcv" in values and isinstance(values["bcv"], Mapping):
            values["bcv"] = BcvConfig.from_dict(values["bcv"])
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["sizes"] = list(self.sizes)
        data["methods"] = list(self.methods)
        return data


def read_json(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def env_defaults() -> dict[str, Any]:
    values: dict[str, Any] = {}
    workers = os.environ.get("BCV_WORKERS")
    if workers:
        try:
            values["workers"] = int(workers)
        except ValueError as e:
            raise ConfigError(f"BCV_WORKERS must be an integer, got {workers!r}") from e
    return values


def load_bcv_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> BcvConfig:
    """Defaults < environment < overrides (flags) < file (its "bcv" block, or the whole file)."""
    values = env_defaults()
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if path is not None:
        data = read_json(path)
        block = data.get("bcv", data)
        values.update(block)
        logger.info(f"Loaded selection config from {path}")
    return BcvConfig.from_dict(values)


def load_experiment_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    bcv_overrides: Mapping[str, Any] | None = None,
) -> ExperimentConfig:
    """Same layering as load_bcv_config, applied to the experiment and its bcv block."""
    values: dict[str, Any] = {k: v for k, v in (overrides or {}).items() if v is not None}
    bcv_values = env_defaults()
    bcv_values.update({k: v for k, v in (bcv_overrides or {}).items() if v is not None})

    if path is not None:
        data = read_json(path)
        file_bcv = data.pop("bcv", {}) or {}
        values.update(data)
        bcv_values.update(file_bcv)
        logger.info(f"Loaded experiment config from {path}")

    values["bcv"] = BcvConfig.from_dict(bcv_values)
    return ExperimentConfig.from_dict(values)
