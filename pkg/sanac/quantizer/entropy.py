from __future__ import annotations

import enum
import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import torch

from sanac.quantizer.vq import QuantizerError

_LN2 = math.log(2.0)


class UsageBasis(str, enum.Enum):
    soft_batch = "soft_batch"
    hard_corpus = "hard_corpus"


@dataclass(frozen=True)
class UsageHistogram:
    q: np.ndarray  # (M,) centroid-usage frequencies
    basis: UsageBasis = UsageBasis.hard_corpus

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=np.float64)
        if q.ndim != 1 or q.size == 0:
            raise QuantizerError("Usage histogram must be a non-empty vector")
        if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
            raise QuantizerError("Usage histogram must be non-negative and sum to 1")
        object.__setattr__(self, "q", q)

    @property
    def size(self) -> int:
        return int(self.q.size)

    @classmethod
    def from_counts(cls, counts: Sequence[int] | np.ndarray) -> UsageHistogram:
        counts = np.asarray(counts, dtype=np.float64)
        total = counts.sum()
        if total <= 0:
            raise QuantizerError("Cannot build a histogram from zero counts")
        return cls(q=counts / total, basis=UsageBasis.hard_corpus)

    def entropy(self) -> float:
        return float(estimate_entropy(self))


def estimate_entropy(hist: UsageHistogram | torch.Tensor | np.ndarray) -> torch.Tensor | float:
    """Entropy in bits with 0 log 0 = 0.

    Tensors stay differentiable (training-time soft usage); histograms and arrays give floats.
    """
    if isinstance(hist, torch.Tensor):
        # unused centroids contribute 0 with a finite gradient
        safe = hist.clamp_min(torch.finfo(hist.dtype).tiny)
        plogp = torch.where(hist > 0, hist * torch.log(safe), torch.zeros_like(hist))
        return -plogp.sum(dim=-1) / _LN2
    q = hist.q if isinstance(hist, UsageHistogram) else np.asarray(hist, dtype=np.float64)
    nz = q[q > 0]
    h = float(-(nz * np.log2(nz)).sum())
    return max(h, 0.0)


def batch_usage(probs: torch.Tensor) -> torch.Tensor:
    """Soft usage: mean membership probability over every code vector of one source.

    probs: (..., M) -> (M,)
    """
    return probs.reshape(-1, probs.shape[-1]).mean(dim=0)


def hard_usage(indices: torch.Tensor | np.ndarray, num_centroids: int) -> UsageHistogram:
    idx = np.asarray(indices.detach().cpu() if isinstance(indices, torch.Tensor) else indices)
    idx = idx.reshape(-1).astype(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= num_centroids):
        raise QuantizerError("Index outside the codebook")
    return UsageHistogram.from_counts(np.bincount(idx, minlength=num_centroids))


def count_usage(indices: torch.Tensor | np.ndarray, num_centroids: int) -> np.ndarray:
    idx = np.asarray(indices.detach().cpu() if isinstance(indices, torch.Tensor) else indices)
    return np.bincount(idx.reshape(-1).astype(np.int64), minlength=num_centroids)


def joint_entropy(per_source_indices: Sequence[np.ndarray]) -> float:
    """Entropy of the joint symbol formed by the K per-source indices of each code slot."""
    columns = [np.asarray(ix).reshape(-1) for ix in per_source_indices]
    if not columns or any(c.size != columns[0].size for c in columns):
        raise QuantizerError("Per-source index arrays must be non-empty and equally sized")
    counts = Counter(zip(*(c.tolist() for c in columns)))
    return UsageHistogram.from_counts(list(counts.values())).entropy()
