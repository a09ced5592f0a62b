from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import torch

from sanac.dsp.framing import FrameSpec
from sanac.model.codec import SystemKind, build_codec
from sanac.model.config import ModelConfig
from sanac.quantizer.entropy import count_usage
from sanac.quantizer.vq import QuantMode
from sanac.services.centroids import init_centroids
from sanac.services.checkpoint import Checkpoint
from sanac.services.dataset import write_synthetic_corpus
from sanac.services.losses import LossConfig
from sanac.services.manifest import SplitSizes, prepare_manifest, write_manifest
from sanac.services.run_config import RunConfig
from sanac.services.training import hard_indices

TINY_MODEL = dict(
    frame_size=16,
    code_length=8,
    vq_dim=2,
    num_sources=2,
    num_centroids=4,
    trunk_channels=4,
    bottleneck_channels=2,
    transform_channels=8,
    conv_kernel=3,
)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_cfg() -> ModelConfig:
    return ModelConfig(**TINY_MODEL)


@pytest.fixture
def tiny_frames() -> FrameSpec:
    return FrameSpec(frame_size=16, hop=12, crossfade_len=4)


@pytest.fixture
def tiny_run_config() -> RunConfig:
    return RunConfig.model_validate(
        {
            "seed": 7,
            "frames": {"frame_size": 16, "hop": 12, "crossfade_len": 4},
            "model": TINY_MODEL,
            "train": {
                "learning_rate": 1e-3,
                "batch_size": 32,
                "max_epochs": 3,
                "min_stage1_epochs": 1,
                "centroid_sample_frames": 128,
                "kmeans_iters": 5,
            },
            "early_stop": {"stage_patience": 1, "stop_patience": 2},
        }
    )


@pytest.fixture
def corpus_manifest(tmp_path: Path) -> Path:
    """Six synthetic utterances (4 train, 1 val, 1 test) of 0.05 s each."""
    speech_dir, noise_dir = write_synthetic_corpus(
        tmp_path / "corpus", num_speech=6, num_noise=2, duration_s=0.05, seed=3
    )
    rows = prepare_manifest(
        speech_dir,
        noise_dir,
        snr_list=[0.0, 5.0],
        sizes=SplitSizes(train=4, val=1, test=1),
        seed=11,
    )
    return write_manifest(tmp_path / "corpus" / "manifest.csv", rows)


def make_checkpoint(
    cfg: ModelConfig, frames: FrameSpec, system: SystemKind = SystemKind.sanac, seed: int = 0
) -> Checkpoint:
    """Untrained codec with k-means codebooks and hard-count tables, ready for the bitstream."""
    torch.manual_seed(seed)
    codec = build_codec(system, cfg)
    sample = torch.from_numpy(
        np.random.default_rng(seed).standard_normal((64, cfg.frame_size))
    ).float()
    init_centroids(codec, sample, iters=5, rng=np.random.default_rng(seed))
    codec.quantizer.set_mode(QuantMode.hard)
    counts = np.stack(
        [count_usage(ix, cfg.num_centroids) + 1 for ix in hard_indices(codec, sample)]
    )
    return Checkpoint(
        codec=codec, frames=frames, loss=LossConfig(), stage=3, usage_counts=counts
    )


@pytest.fixture
def sanac_ckpt(tiny_cfg: ModelConfig, tiny_frames: FrameSpec) -> Checkpoint:
    return make_checkpoint(tiny_cfg, tiny_frames, SystemKind.sanac, seed=0)


@pytest.fixture
def baseline_ckpt(tiny_cfg: ModelConfig, tiny_frames: FrameSpec) -> Checkpoint:
    return make_checkpoint(tiny_cfg, tiny_frames, SystemKind.baseline, seed=1)


@pytest.fixture
def checkpoint_factory(tiny_cfg: ModelConfig, tiny_frames: FrameSpec):
    def _make(system: SystemKind = SystemKind.sanac, seed: int = 0) -> Checkpoint:
        return make_checkpoint(tiny_cfg, tiny_frames, system, seed)

    return _make
