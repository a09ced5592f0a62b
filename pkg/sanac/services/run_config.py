from __future__ import annotations

import json
import tomllib
from collections.abc import Iterator, Sequence
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from sanac.dsp.framing import FrameSpec
from sanac.errors import ConfigError
from sanac.model.codec import SystemKind
from sanac.model.config import ModelConfig
from sanac.quantizer.schedule import AlphaSchedule
from sanac.services.losses import LossConfig


class FramesSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    frame_size: int = Field(default=512, gt=0)
    hop: int = Field(default=448, gt=0)
    crossfade_len: int = Field(default=64, ge=0)

    def to_spec(self) -> FrameSpec:
        return FrameSpec(self.frame_size, self.hop, self.crossfade_len)


class EarlyStopPolicy(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    stage_patience: int = Field(default=3, ge=1)
    stop_patience: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def _check(self) -> EarlyStopPolicy:
        if self.stop_patience < self.stage_patience:
            raise ConfigError("stop_patience must be >= stage_patience")
        return self


class TrainSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    learning_rate: float = Field(default=1e-4, gt=0)
    batch_size: int = Field(default=64, gt=0)
    max_epochs: int = Field(default=300, gt=0)
    min_stage1_epochs: int = Field(default=3, ge=1)
    centroid_sample_frames: int = Field(default=1024, gt=0)
    kmeans_iters: int = Field(default=20, gt=0)
    # share of training rows moved to validation when the manifest has no val split
    val_fraction: float = Field(default=0.1, gt=0, lt=1)


class PathsSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    manifest: str | None = None
    run_dir: str | None = None


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    system: SystemKind = SystemKind.sanac
    seed: int = 0
    frames: FramesSection = FramesSection()
    model: ModelConfig = ModelConfig()
    loss: LossConfig = LossConfig()
    alpha: AlphaSchedule = AlphaSchedule()
    early_stop: EarlyStopPolicy = EarlyStopPolicy()
    train: TrainSection = TrainSection()
    paths: PathsSection = PathsSection()

    @model_validator(mode="after")
    def _check(self) -> RunConfig:
        if self.frames.frame_size != self.model.frame_size:
            raise ConfigError("frames.frame_size must equal model.frame_size")
        return self


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_override(data: dict[str, Any], override: str) -> None:
    """Apply one 'section.key=value' override in place (value parsed as JSON when possible)."""
    if "=" not in override:
        raise ConfigError(f"Override must look like section.key=value: {override!r}")
    dotted, raw = override.split("=", 1)
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"Empty key in override {override!r}")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted}: {key} is not a section")
    node[keys[-1]] = _parse_value(raw)


def read_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    if path.suffix == ".toml":
        with path.open("rb") as f:
            return tomllib.load(f)
    if path.suffix == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    raise ConfigError(f"Unsupported config format {path.suffix!r} (use .toml or .json)")


def load_run_config(
    path: str | Path | None = None, overrides: Sequence[str] = ()
) -> RunConfig:
    data: dict[str, Any] = read_config_file(path) if path else {}
    for override in overrides:
        apply_override(data, override)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def describe_keys(
    model: type[BaseModel] = RunConfig, prefix: str = ""
) -> Iterator[tuple[str, Any]]:
    """Every leaf key of the run config with its default, dotted."""
    for name, info in model.model_fields.items():
        annotation = info.annotation
        if isinstance(annotation, type) and issubclass(annotation, BaseModel):
            yield from describe_keys(annotation, f"{prefix}{name}.")
        else:
            default = info.get_default(call_default_factory=True)
            yield f"{prefix}{name}", getattr(default, "value", default)
