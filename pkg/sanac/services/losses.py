from __future__ import annotations

from dataclasses import dataclass, field

import torch
from pydantic import BaseModel, ConfigDict, Field

from sanac.errors import TrainingError
from sanac.quantizer.entropy import estimate_entropy


class LossConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda_mse: float = Field(default=1.0, ge=0)
    lambda_ent_tot: float = Field(default=1.0 / 5.0, ge=0)
    lambda_ratio: float = Field(default=1.0 / 60.0, ge=0)
    xi: float = Field(default=2.0, gt=0)  # target total entropy, bits per code vector slot
    psi: float = Field(default=3.0, gt=0)  # target H_speech / H_noise
    ratio_floor: float = Field(default=1e-3, gt=0)  # bits; denominator floor of the ratio term
    # Per-source targets replace the (xi, psi) pair when set
    source_targets: list[float] | None = None


@dataclass
class LossBreakdown:
    total: torch.Tensor
    mse_mixture: torch.Tensor
    mse_speech: torch.Tensor | None = None
    entropy_penalty: torch.Tensor | None = None
    ratio_penalty: torch.Tensor | None = None
    entropies: list[torch.Tensor] = field(default_factory=list)

    def as_floats(self) -> dict[str, float | None]:
        def _f(t: torch.Tensor | None) -> float | None:
            return None if t is None else float(t.detach())

        return {
            "loss": _f(self.total),
            "mse_mixture": _f(self.mse_mixture),
            "mse_speech": _f(self.mse_speech),
            "entropy_penalty": _f(self.entropy_penalty),
            "ratio_penalty": _f(self.ratio_penalty),
        }


def mse(reference: torch.Tensor, estimate: torch.Tensor) -> torch.Tensor:
    return torch.mean((reference - estimate) ** 2)


def entropy_penalty(
    entropies: list[torch.Tensor | float], cfg: LossConfig
) -> tuple[torch.Tensor, torch.Tensor | None]:
    """(total-or-per-source penalty, ratio penalty). Ratio applies to exactly two sources."""
    hs = [h if torch.is_tensor(h) else torch.tensor(float(h), dtype=torch.float64)
          for h in entropies]
    if cfg.source_targets is not None:
        if len(cfg.source_targets) != len(hs):
            raise TrainingError("source_targets must name one target per codebook")
        per_source = sum((target - h) ** 2 for target, h in zip(cfg.source_targets, hs))
        return cfg.lambda_ent_tot * per_source, None

    total = cfg.lambda_ent_tot * (cfg.xi - sum(hs)) ** 2
    if len(hs) != 2:
        return total, None
    h1, h2 = hs
    return total, cfg.lambda_ratio * (cfg.psi - h1 / torch.clamp(h2, min=cfg.ratio_floor)) ** 2


def total_loss(
    *,
    mixture: torch.Tensor,
    mixture_hat: torch.Tensor,
    cfg: LossConfig,
    stage: int,
    speech: torch.Tensor | None = None,
    speech_hat: torch.Tensor | None = None,
    usage: list[torch.Tensor] | None = None,
) -> LossBreakdown:
    """Time-domain MSE on speech and mixture; stage 3 adds the entropy-control terms.

    `usage` holds one soft usage histogram per codebook. Without a speech estimate
    (baseline) only the mixture term and the total-entropy term remain.
    """
    if mixture.shape != mixture_hat.shape:
        raise TrainingError(f"Mixture shapes differ: {mixture.shape} vs {mixture_hat.shape}")

    mse_x = mse(mixture, mixture_hat)
    loss = cfg.lambda_mse * mse_x
    mse_s = None
    if speech is not None and speech_hat is not None:
        mse_s = mse(speech, speech_hat)
        loss = loss + cfg.lambda_mse * mse_s

    breakdown = LossBreakdown(total=loss, mse_mixture=mse_x, mse_speech=mse_s)
    if usage:
        breakdown.entropies = [estimate_entropy(q) for q in usage]

    if stage >= 3:
        if not usage:
            raise TrainingError("Stage 3 needs usage histograms")
        ent, ratio = entropy_penalty(breakdown.entropies, cfg)
        breakdown.entropy_penalty = ent
        breakdown.ratio_penalty = ratio
        breakdown.total = breakdown.total + ent + (ratio if ratio is not None else 0.0)
    return breakdown
