"""Run configuration: dataclasses plus strict JSON parsing.

Unknown keys are rejected everywhere so a typo in a hyperparameter name
fails loudly instead of silently falling back to a default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path
from typing import Any

from .datasets import DATASETS
from .errors import ConfigError, InvalidParameterError
from .schedule import ScheduleSpec


@dataclasses.dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 32
    hidden: tuple[int, ...] = (128, 128)
    activation: str = "silu"

    @property
    def layer_dims(self) -> list[int]:
        return [2 + self.embed_dim, *self.hidden, 2]


@dataclasses.dataclass(frozen=True)
class SamplerConfig:
    """``tau`` wins over ``r`` when both are given; ``r`` defaults to 10."""

    kind: str = "uniform"
    k: float = 5.0
    tau: int | None = None
    r: float | None = None


@dataclasses.dataclass(frozen=True)
class WeightingConfig:
    kind: str = "constant"
    # stored under the JSON key "lambda"
    lam: float = 0.6
    c: float = 1.0


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    dataset: str = "ring8"
    n_points: int = 20000
    batch_size: int = 256
    iterations: int = 5000
    seed: int = 0
    schedule: ScheduleSpec = ScheduleSpec()
    sampler: SamplerConfig = SamplerConfig()
    weighting: WeightingConfig = WeightingConfig()
    eval_every: int = 500
    eval_samples: int = 1000
    lr: float = 1e-4
    ema_decay: float = 0.999
    model: ModelConfig = ModelConfig()

    def validate(self) -> "TrainConfig":
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {self.dataset!r}; expected one of {DATASETS}", "dataset")
        for key in ("n_points", "batch_size", "eval_samples"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be positive", key)
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0", "iterations")
        if self.eval_every < 1 or (self.iterations and self.eval_every > self.iterations):
            raise ConfigError("eval_every must be in [1, iterations]", "eval_every")
        if not self.lr > 0:
            raise ConfigError("lr must be positive", "lr")
        if not 0.0 <= self.ema_decay <= 1.0:
            raise ConfigError("ema_decay must lie in [0, 1]", "ema_decay")
        s = self.sampler
        if s.kind not in ("uniform", "asymmetric"):
            raise ConfigError(f"unknown sampler kind {s.kind!r}", "sampler.kind")
        if s.kind == "asymmetric":
            if not s.k >= 1.0:
                raise ConfigError("sampler.k must be >= 1", "sampler.k")
            if s.tau is not None and not 1 <= s.tau <= self.schedule.T:
                raise ConfigError(f"sampler.tau must lie in [1, {self.schedule.T}]", "sampler.tau")
            if s.r is not None and not s.r > 1.0:
                raise ConfigError("sampler.r must be > 1", "sampler.r")
        w = self.weighting
        if w.kind not in ("constant", "caw"):
            raise ConfigError(f"unknown weighting kind {w.kind!r}", "weighting.kind")
        if w.kind == "caw" and not 0.5 <= w.lam <= 1.0:
            raise ConfigError("weighting.lambda must lie in [0.5, 1]", "weighting.lambda")
        if w.kind == "constant" and not w.c > 0:
            raise ConfigError("weighting.c must be positive", "weighting.c")
        if self.model.embed_dim < 2 or self.model.embed_dim % 2:
            raise ConfigError("model.embed_dim must be even and >= 2", "model.embed_dim")
        if self.model.activation not in ("relu", "silu"):
            raise ConfigError("model.activation must be relu or silu", "model.activation")
        return self

    def to_dict(self) -> dict:
        return to_jsonable(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclasses.dataclass(frozen=True)
class AnalysisConfig:
    r: float = 10.0
    sde: str | None = None
    sde_points: int = 1000
    sde_t_max: float | None = None
    x0_norm2: float = 1.0


@dataclasses.dataclass(frozen=True)
class CompareConfig:
    threshold: float | None = None


@dataclasses.dataclass(frozen=True)
class RunConfig:
    train: TrainConfig = TrainConfig()
    out_dir: str = "runs"
    label: str = "run"
    analysis: AnalysisConfig = AnalysisConfig()
    compare: CompareConfig = CompareConfig()

    @property
    def seed(self) -> int:
        return self.train.seed


_JSON_RENAMES = {"lam": "lambda"}
_SECTIONS = {
    "schedule": ScheduleSpec,
    "sampler": SamplerConfig,
    "weighting": WeightingConfig,
    "model": ModelConfig,
}


def to_jsonable(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {
            _JSON_RENAMES.get(f.name, f.name): to_jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
        }
    if isinstance(obj, tuple):
        return [to_jsonable(v) for v in obj]
    return obj


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'} must be a JSON object", prefix or None)
    names = {_JSON_RENAMES.get(f.name, f.name): f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        full = f"{prefix}.{key}" if prefix else key
        if key not in names:
            raise ConfigError(f"unknown config key {full!r}", full)
        field = names[key]
        if key in _SECTIONS and cls is TrainConfig:
            value = _build(_SECTIONS[key], value, full)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[field.name] = value
    try:
        return cls(**kwargs)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), prefix or None) from exc
    except TypeError as exc:
        raise ConfigError(f"bad value in {prefix or 'config'}: {exc}", prefix or None) from exc


def train_config_from_dict(data: dict, prefix: str = "") -> TrainConfig:
    return _build(TrainConfig, data, prefix).validate()


REQUIRED_FILE_KEYS = ("dataset", "iterations")
_RUN_KEYS = {"out_dir", "label", "analysis", "compare"}


def run_config_from_dict(data: dict) -> RunConfig:
    """Parse a config object; training keys sit at the top level."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    train_part = {k: v for k, v in data.items() if k not in _RUN_KEYS}
    train = train_config_from_dict(train_part)
    analysis = _build(AnalysisConfig, data.get("analysis", {}), "analysis")
    if analysis.sde not in (None, "vp", "ve", "edm"):
        raise ConfigError("analysis.sde must be one of vp, ve, edm", "analysis.sde")
    if not analysis.r > 1.0:
        raise ConfigError("analysis.r must be > 1", "analysis.r")
    compare = _build(CompareConfig, data.get("compare", {}), "compare")
    out_dir = data.get("out_dir", "runs")
    label = data.get("label", "run")
    if not isinstance(out_dir, str) or not isinstance(label, str) or not label:
        raise ConfigError("out_dir and label must be non-empty strings", "label")
    return RunConfig(train, out_dir, label, analysis, compare)


def load_config(path) -> RunConfig:
    """Read a JSON config file; it must at least name the dataset and iteration count."""
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    if isinstance(data, dict):
        for key in REQUIRED_FILE_KEYS:
            if key not in data:
                raise ConfigError(f"{path}: missing required config key {key!r}", key)
    return run_config_from_dict(data)


def replace_train(cfg: RunConfig, **changes) -> RunConfig:
    return dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, **changes).validate())
