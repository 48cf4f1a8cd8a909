"""Run configuration: flat key=value files with CLI overrides.

Every field has a default mirroring the model parameter table, so
``loadcast run --synth`` works with no config file at all. The seed is an
explicit field — nothing falls back to wall-clock time.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields

__all__ = ["ConfigError", "RunConfig"]


class ConfigError(ValueError):
    """Bad config file or option value."""


@dataclass
class RunConfig:
    # data source: explicit CSVs, or synthetic generation when synth=True
    load_csv: str = ""
    weather_csv: str = ""
    holiday_csv: str = ""
    synth: bool = False
    synth_days: int = 60
    synth_noise: float = 0.8
    synth_distractors: int = 0
    out_dir: str = "runs/latest"
    seed: int = 0

    # windowing and split
    time_steps: int = 12
    horizon: int = 1
    train_ratio: float = 0.7
    val_ratio: float = 0.2
    test_ratio: float = 0.1

    # screening
    alpha: float = 0.05
    ce_min: float | None = None
    granger_lag: int = 4
    knn_k: int = 3
    outlier_k: float = 5.0

    # model hyperparameters (table defaults)
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-4
    dropout: float = 0.3
    decay_factor: float = 0.5
    decay_every: int = 10
    hidden_size: int = 150
    hidden_layers: int = 2
    channels_1: int = 64
    channels_2: int = 128
    kernel_size: int = 3
    pool_size: int = 2
    pool_stride: int = 2
    cnn_fc_dim: int = 150
    attention_rows: int = 8

    architectures: str = "all"

    def validate(self) -> None:
        if abs(self.train_ratio + self.val_ratio + self.test_ratio - 1.0) > 1e-9:
            raise ConfigError("train/val/test ratios must sum to 1")
        if not self.synth and not (self.load_csv and self.weather_csv
                                   and self.holiday_csv):
            raise ConfigError("provide load/weather/holiday CSVs or set synth=true")
        if self.time_steps < 1 or self.horizon < 1:
            raise ConfigError("time_steps and horizon must be >= 1")
        if self.epochs < 1 or self.batch_size < 2:
            raise ConfigError("epochs must be >= 1 and batch_size >= 2")

    def architecture_list(self) -> list:
        from .models import ARCHITECTURES
        if self.architectures.strip().lower() == "all":
            return list(ARCHITECTURES)
        archs = [a.strip().lower() for a in self.architectures.split(",") if a.strip()]
        unknown = [a for a in archs if a not in ARCHITECTURES]
        if unknown:
            raise ConfigError(f"unknown architectures {unknown}; valid: {ARCHITECTURES}")
        return archs

    def content_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        values = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, val = (part.strip() for part in line.split("=", 1))
                values[key] = val
        return cls().with_overrides(values)

    def with_overrides(self, overrides: dict) -> "RunConfig":
        """New config with string/typed overrides applied and type-checked."""
        by_name = {f.name: f for f in fields(self)}
        current = asdict(self)
        for key, val in overrides.items():
            if val is None:
                continue
            if key not in by_name:
                raise ConfigError(f"unknown config key {key!r}")
            current[key] = _coerce(key, val, by_name[key].type)
        return RunConfig(**current)


def _coerce(key: str, val, type_hint: str):
    if not isinstance(val, str):
        return val
    text = val.strip()
    if key == "ce_min":
        return None if text.lower() in ("", "none") else float(text)
    if "bool" in str(type_hint):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {val!r}")
    if "int" in str(type_hint):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an int, got {val!r}") from exc
    if "float" in str(type_hint):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a float, got {val!r}") from exc
    return text
