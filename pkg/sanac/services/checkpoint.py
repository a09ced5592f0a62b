from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import torch

from sanac.dsp.framing import FrameSpec
from sanac.errors import SanacError
from sanac.model.codec import BaselineCodec, SourceAwareCodec, SystemKind, build_codec
from sanac.model.config import ModelConfig
from sanac.quantizer.vq import QuantMode
from sanac.services.losses import LossConfig

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class CheckpointError(SanacError):
    pass


def model_hash(codec: SourceAwareCodec | BaselineCodec, frames: FrameSpec) -> bytes:
    """SHA-256 over the config and every state tensor (name-sorted, float32 little-endian)."""
    h = hashlib.sha256()
    meta = {
        "system": codec.kind.value,
        "model": codec.cfg.model_dump(),
        "frames": [frames.frame_size, frames.hop, frames.crossfade_len],
    }
    h.update(json.dumps(meta, sort_keys=True).encode("utf-8"))
    for name, tensor in sorted(codec.state_dict().items()):
        h.update(name.encode("utf-8"))
        array = tensor.detach().cpu().numpy()
        if array.dtype.kind == "f":
            array = array.astype("<f4")
        h.update(np.ascontiguousarray(array).tobytes())
    return h.digest()


@dataclass
class Checkpoint:
    codec: SourceAwareCodec | BaselineCodec
    frames: FrameSpec
    loss: LossConfig
    stage: int
    epoch: int = 0
    # (K, M) hard-index counts on the training split; Huffman tables are built from these
    usage_counts: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def system(self) -> SystemKind:
        return self.codec.kind

    @property
    def alpha(self) -> float:
        return float(self.codec.quantizer.alpha)

    @cached_property
    def content_hash(self) -> bytes:
        # taken once; the codec is not trained further through a Checkpoint
        return model_hash(self.codec, self.frames)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "system": ckpt.codec.kind.value,
        "model_config": ckpt.codec.cfg.model_dump(),
        "frames": [ckpt.frames.frame_size, ckpt.frames.hop, ckpt.frames.crossfade_len],
        "loss_config": ckpt.loss.model_dump(),
        "state_dict": ckpt.codec.state_dict(),
        "alpha": ckpt.alpha,
        "stage": ckpt.stage,
        "epoch": ckpt.epoch,
        "usage_counts": (
            None if ckpt.usage_counts is None else torch.as_tensor(ckpt.usage_counts)
        ),
        "content_hash": ckpt.content_hash.hex(),
        "extra": ckpt.extra,
    }
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp_path)
    os.replace(tmp_path, path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"Unreadable checkpoint {path}: {e}") from e
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {payload.get('format_version')}")

    cfg = ModelConfig(**payload["model_config"])
    codec = build_codec(payload["system"], cfg)
    codec.load_state_dict(payload["state_dict"])
    codec.eval()
    stage = int(payload["stage"])
    if stage >= 2 and bool(codec.quantizer.initialized):
        codec.quantizer.set_mode(QuantMode.hard)

    counts = payload.get("usage_counts")
    ckpt = Checkpoint(
        codec=codec,
        frames=FrameSpec(*payload["frames"]),
        loss=LossConfig(**payload["loss_config"]),
        stage=stage,
        epoch=int(payload.get("epoch", 0)),
        usage_counts=None if counts is None else counts.numpy(),
        extra=dict(payload.get("extra") or {}),
    )
    if ckpt.content_hash.hex() != payload["content_hash"]:
        raise CheckpointError(f"{path}: stored content hash does not match parameters")
    return ckpt
