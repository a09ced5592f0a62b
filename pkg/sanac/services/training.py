from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import torch

from sanac.db.models import RunStatus
from sanac.errors import NonFiniteLossError, TrainingError
from sanac.model.codec import BaselineCodec, SourceAwareCodec, SystemKind, build_codec
from sanac.quantizer.entropy import batch_usage, count_usage, estimate_entropy, joint_entropy
from sanac.quantizer.vq import QuantMode, hard_quantize
from sanac.services.centroids import init_centroids
from sanac.services.checkpoint import Checkpoint, save_checkpoint
from sanac.services.dataset import FrameBatch, FrameCorpus
from sanac.services.losses import LossBreakdown, entropy_penalty, total_loss
from sanac.services.training_log import EpochSummary, TrainingLog

if TYPE_CHECKING:
    from sanac.services.run_config import EarlyStopPolicy, RunConfig

logger = logging.getLogger(__name__)

Codec = SourceAwareCodec | BaselineCodec


@dataclass
class StageState:
    stage: int = 1
    epochs_in_stage: int = 0
    best_validation_loss: float = math.inf
    epochs_since_improvement: int = 0
    # epochs since the quantizer was switched on; drives alpha annealing
    quantized_epochs: int = 0

    def observe(self, val_loss: float) -> bool:
        self.epochs_in_stage += 1
        if self.stage >= 2:
            self.quantized_epochs += 1
        if val_loss < self.best_validation_loss:
            self.best_validation_loss = val_loss
            self.epochs_since_improvement = 0
            return True
        self.epochs_since_improvement += 1
        return False

    def should_advance(self, policy: EarlyStopPolicy, min_stage1_epochs: int) -> bool:
        if self.stage >= 3:
            return False
        if self.stage == 1 and self.epochs_in_stage < min_stage1_epochs:
            return False
        return self.epochs_since_improvement >= policy.stage_patience

    def should_stop(self, policy: EarlyStopPolicy) -> bool:
        return self.stage == 3 and self.epochs_since_improvement >= policy.stop_patience

    def advance(self) -> None:
        if self.stage >= 3:
            raise TrainingError("Stage 3 is the last stage")
        self.stage += 1
        self.epochs_in_stage = 0
        self.best_validation_loss = math.inf
        self.epochs_since_improvement = 0


@dataclass(frozen=True)
class EpochStats:
    loss: float
    mse_mixture: float
    mse_speech: float | None
    entropies: tuple[float, ...]


@dataclass
class TrainingResult:
    checkpoint_path: Path
    final_stage: int
    best_validation_loss: float
    history: list[EpochSummary] = field(default_factory=list)

    @property
    def first_train_mse(self) -> float:
        return self._mse(self.history[0])

    @property
    def last_train_mse(self) -> float:
        return self._mse(self.history[-1])

    @staticmethod
    def _mse(s: EpochSummary) -> float:
        return s.mse_mixture + (s.mse_speech or 0.0)


@dataclass(frozen=True)
class CorpusEntropy:
    entropies: tuple[float, ...]  # hard-count entropy per codebook (H1, H2)
    counts: np.ndarray  # (K, M)
    joint: float  # entropy of the joint symbol across codebooks

    @property
    def bits_total(self) -> float:
        return float(sum(self.entropies))


def _forward_loss(
    codec: Codec, batch: FrameBatch, cfg: RunConfig, stage: int
) -> LossBreakdown:
    out = codec(batch.mixture)
    usage = [batch_usage(p) for p in out.quantized.probs] if out.quantized.probs else None
    speech_hat = out.sources[:, 0] if out.sources is not None else None
    return total_loss(
        mixture=batch.mixture,
        mixture_hat=out.mixture,
        speech=batch.speech if speech_hat is not None else None,
        speech_hat=speech_hat,
        usage=usage,
        cfg=cfg.loss,
        stage=stage,
    )


class Trainer:
    """Three-stage schedule: plain autoencoding, soft-to-hard VQ, then entropy control."""

    def __init__(
        self,
        config: RunConfig,
        train: FrameCorpus,
        val: FrameCorpus,
        *,
        run_dir: str | Path,
        log: TrainingLog | None = None,
    ):
        self.config = config
        self.train_corpus = train.require_nonempty("train")
        self.val_corpus = val.require_nonempty("validation")
        self.run_dir = Path(run_dir)
        self.log = log

        torch.manual_seed(config.seed)
        self._rng = np.random.default_rng(config.seed)
        self.codec: Codec = build_codec(config.system, config.model)
        self.optimizer = torch.optim.Adam(self.codec.parameters(), lr=config.train.learning_rate)
        self.state = StageState()
        self._best_state: dict | None = None
        self.history: list[EpochSummary] = []

    @property
    def best_path(self) -> Path:
        return self.run_dir / "best.pt"

    @property
    def last_path(self) -> Path:
        return self.run_dir / "last.pt"

    def _checkpoint(self, *, usage_counts: np.ndarray | None = None) -> Checkpoint:
        return Checkpoint(
            codec=self.codec,
            frames=self.config.frames.to_spec(),
            loss=self.config.loss,
            stage=self.state.stage,
            epoch=len(self.history),
            usage_counts=usage_counts,
            extra={"seed": self.config.seed},
        )

    def train_epoch(self, epoch: int) -> EpochStats:
        self.codec.train()
        stage = self.state.stage
        totals = np.zeros(3)
        entropies: list[np.ndarray] = []
        n_frames = 0
        for b, batch in enumerate(
            self.train_corpus.batches(self.config.train.batch_size, rng=self._rng)
        ):
            self.optimizer.zero_grad()
            breakdown = _forward_loss(self.codec, batch, self.config, stage)
            if not torch.isfinite(breakdown.total):
                raise NonFiniteLossError(f"Non-finite training loss at epoch {epoch}, batch {b}")
            breakdown.total.backward()
            self.optimizer.step()

            n = len(batch)
            n_frames += n
            totals += n * np.array(
                [
                    float(breakdown.total.detach()),
                    float(breakdown.mse_mixture.detach()),
                    float(breakdown.mse_speech.detach()) if breakdown.mse_speech is not None else 0,
                ]
            )
            if breakdown.entropies:
                entropies.append(n * np.array([float(h.detach()) for h in breakdown.entropies]))
        mean = totals / n_frames
        return EpochStats(
            loss=float(mean[0]),
            mse_mixture=float(mean[1]),
            mse_speech=float(mean[2]) if self.codec.kind is SystemKind.sanac else None,
            entropies=tuple((np.sum(entropies, axis=0) / n_frames).tolist()) if entropies else (),
        )

    @torch.no_grad()
    def validate(self) -> EpochStats:
        """Stage-appropriate loss over the whole validation split (usage pooled over the split)."""
        self.codec.eval()
        stage = self.state.stage
        mse_x = mse_s = 0.0
        n_frames = 0
        usage_sum: list[torch.Tensor] | None = None
        n_vectors = 0
        for batch in self.val_corpus.batches(self.config.train.batch_size):
            out = self.codec(batch.mixture)
            n = len(batch)
            n_frames += n
            mse_x += n * float(torch.mean((batch.mixture - out.mixture) ** 2))
            if out.sources is not None:
                mse_s += n * float(torch.mean((batch.speech - out.sources[:, 0]) ** 2))
            if out.quantized.probs:
                sums = [p.reshape(-1, p.shape[-1]).double().sum(dim=0) for p in out.quantized.probs]
                usage_sum = sums if usage_sum is None else [a + s for a, s in zip(usage_sum, sums)]
                n_vectors += out.quantized.probs[0].shape[0] * out.quantized.probs[0].shape[1]

        mse_x /= n_frames
        mse_s /= n_frames
        cfg = self.config.loss
        loss = cfg.lambda_mse * (mse_x + mse_s)
        entropies: tuple[float, ...] = ()
        if usage_sum is not None:
            hs = [estimate_entropy(u / n_vectors) for u in usage_sum]
            entropies = tuple(float(h) for h in hs)
            if stage >= 3:
                ent, ratio = entropy_penalty(hs, cfg)
                loss += float(ent) + (float(ratio) if ratio is not None else 0.0)
        return EpochStats(
            loss=loss,
            mse_mixture=mse_x,
            mse_speech=mse_s if self.codec.kind is SystemKind.sanac else None,
            entropies=entropies,
        )

    def _enter_next_stage(self) -> None:
        if self._best_state is not None:
            self.codec.load_state_dict(self._best_state)
        self.state.advance()
        if self.state.stage == 2:
            frames = self.train_corpus.sample_mixture_frames(
                self.config.train.centroid_sample_frames, self._rng
            )
            init_centroids(
                self.codec,
                frames,
                iters=self.config.train.kmeans_iters,
                rng=np.random.default_rng([self.config.seed, 1]),
            )
            # centroids are new parameters as far as Adam's moment estimates go
            self.optimizer = torch.optim.Adam(
                self.codec.parameters(), lr=self.config.train.learning_rate
            )
        logger.info(f"Entering stage {self.state.stage}")

    def run(self) -> TrainingResult:
        cfg = self.config
        for epoch in range(cfg.train.max_epochs):
            alpha = None
            if self.state.stage >= 2:
                alpha = cfg.alpha.value(self.state.quantized_epochs)
                self.codec.quantizer.set_alpha(alpha)

            train_stats = self.train_epoch(epoch)
            val_stats = self.validate()
            improved = self.state.observe(val_stats.loss)
            summary = EpochSummary(
                epoch=epoch,
                stage=self.state.stage,
                train_loss=train_stats.loss,
                val_loss=val_stats.loss,
                mse_mixture=train_stats.mse_mixture,
                mse_speech=train_stats.mse_speech,
                entropies=val_stats.entropies,
                alpha=alpha,
            )
            self.history.append(summary)
            if self.log:
                self.log.log_epoch(summary)
            logger.info(
                f"epoch {epoch} stage {self.state.stage} train {train_stats.loss:.6f} "
                f"val {val_stats.loss:.6f} H {val_stats.entropies} alpha {alpha}"
            )

            if improved:
                self._best_state = copy.deepcopy(self.codec.state_dict())
                save_checkpoint(self.best_path, self._checkpoint())
            save_checkpoint(self.last_path, self._checkpoint())

            if self.state.should_stop(cfg.early_stop):
                logger.info(
                    f"Validation loss flat for {cfg.early_stop.stop_patience} epochs; stopping"
                )
                break
            if self.state.should_advance(cfg.early_stop, cfg.train.min_stage1_epochs):
                self._enter_next_stage()

        return self._finalize()

    def _finalize(self) -> TrainingResult:
        if self._best_state is not None:
            self.codec.load_state_dict(self._best_state)
        counts = None
        if bool(self.codec.quantizer.initialized):
            self.codec.quantizer.set_mode(QuantMode.hard)
            usage = corpus_usage(self.codec, self.train_corpus, self.config.train.batch_size)
            counts = usage.counts
        path = save_checkpoint(self.best_path, self._checkpoint(usage_counts=counts))
        return TrainingResult(
            checkpoint_path=path,
            final_stage=self.state.stage,
            best_validation_loss=self.state.best_validation_loss,
            history=list(self.history),
        )


@torch.no_grad()
def hard_indices(
    codec: Codec, frames: torch.Tensor, *, batch_size: int = 256
) -> list[np.ndarray]:
    """Nearest-centroid index per code column: one (n_frames, P) array per codebook."""
    codec.eval()
    chunks: list[list[np.ndarray]] = [[] for _ in range(codec.num_codebooks)]
    for start in range(0, frames.shape[0], batch_size):
        codes = codec.split(codec.encode(frames[start : start + batch_size]))
        for k, code in enumerate(codes):
            idx, _ = hard_quantize(code.transpose(-1, -2), codec.quantizer.codebook(k))
            chunks[k].append(idx.numpy())
    return [np.concatenate(c) for c in chunks]


def corpus_usage(codec: Codec, corpus: FrameCorpus, batch_size: int = 256) -> CorpusEntropy:
    frames = torch.cat([b.mixture for b in corpus.batches(batch_size)])
    indices = hard_indices(codec, frames, batch_size=batch_size)
    m = codec.quantizer.num_centroids
    counts = np.stack([count_usage(ix, m) for ix in indices])
    entropies = tuple(float(estimate_entropy(c / c.sum())) for c in counts)
    return CorpusEntropy(entropies=entropies, counts=counts, joint=joint_entropy(indices))


def measure_corpus_entropy(ckpt: Checkpoint, corpus: FrameCorpus) -> CorpusEntropy:
    """Hard-count entropies of every codebook over a split (the achievable-rate estimate)."""
    if not bool(ckpt.codec.quantizer.initialized):
        raise TrainingError("Checkpoint has no codebooks yet (stage 1)")
    return corpus_usage(ckpt.codec, corpus.require_nonempty("evaluation"))


def run_training(
    config: RunConfig,
    train: FrameCorpus,
    val: FrameCorpus,
    *,
    run_dir: str | Path,
) -> TrainingResult:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    log = TrainingLog.open(run_dir / "training_log.sqlite")
    log.start_run(
        system=config.system.value, seed=config.seed, config_json=config.model_dump_json()
    )
    try:
        result = Trainer(config, train, val, run_dir=run_dir, log=log).run()
    except Exception as e:
        log.finish(status=RunStatus.failed, error=str(e))
        raise
    log.finish(status=RunStatus.finished, best_checkpoint=str(result.checkpoint_path))
    return result
