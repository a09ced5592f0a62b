from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from sanac.errors import SanacError

logger = logging.getLogger(__name__)

# keeps sqrt differentiable when a code vector sits exactly on a centroid
_DIST_EPS = 1e-12


class QuantizerError(SanacError):
    pass


class QuantMode(str, enum.Enum):
    off = "off"  # stage 1: codes pass through
    soft = "soft"  # training: convex combination of centroids
    hard = "hard"  # inference: nearest centroid


@dataclass(frozen=True)
class SoftAssignment:
    p: torch.Tensor  # (..., M), sums to 1
    d: torch.Tensor  # (..., M), Euclidean distances


def _check_finite(y: torch.Tensor) -> None:
    if not torch.isfinite(y).all():
        raise QuantizerError("Code vectors contain non-finite values")


def distances(y: torch.Tensor, centroids: torch.Tensor) -> torch.Tensor:
    """Unsquared Euclidean distance of every vector in y (..., L) to every centroid (M, L)."""
    diff = y.unsqueeze(-2) - centroids
    return torch.sqrt((diff * diff).sum(dim=-1) + _DIST_EPS)


def soft_assign(y: torch.Tensor, centroids: torch.Tensor, alpha: float) -> SoftAssignment:
    if alpha <= 0:
        raise QuantizerError("alpha must be positive")
    _check_finite(y)
    d = distances(y, centroids)
    logits = -alpha * d
    logits = logits - logits.amax(dim=-1, keepdim=True)
    return SoftAssignment(p=torch.softmax(logits, dim=-1), d=d)


def soft_quantize(p: torch.Tensor, centroids: torch.Tensor) -> torch.Tensor:
    return p @ centroids


def hard_quantize(y: torch.Tensor, centroids: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Nearest centroid; ties resolve to the lowest index."""
    _check_finite(y)
    diff = y.unsqueeze(-2) - centroids
    index = torch.argmin((diff * diff).sum(dim=-1), dim=-1)
    return index, centroids[index]


@dataclass
class QuantizerOutput:
    values: list[torch.Tensor]  # per source, (B, L, P)
    probs: list[torch.Tensor] | None = None  # per source, (B, P, M) in soft mode
    indices: list[torch.Tensor] | None = None  # per source, (B, P) in hard mode


class SoftToHardQuantizer(nn.Module):
    """K learnable codebooks of M centroids in R^L, one per source."""

    def __init__(self, num_codebooks: int, num_centroids: int, dim: int):
        super().__init__()
        self.centroids = nn.Parameter(torch.zeros(num_codebooks, num_centroids, dim))
        self.register_buffer("alpha", torch.tensor(10.0, dtype=torch.float64))
        self.register_buffer("initialized", torch.tensor(False))
        self.mode = QuantMode.off

    @property
    def num_codebooks(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def num_centroids(self) -> int:
        return int(self.centroids.shape[1])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[2])

    def codebook(self, k: int) -> torch.Tensor:
        return self.centroids[k]

    def set_alpha(self, alpha: float) -> None:
        self.alpha.fill_(float(alpha))

    def set_mode(self, mode: QuantMode | str) -> None:
        mode = QuantMode(mode)
        if mode is not QuantMode.off and not bool(self.initialized):
            raise QuantizerError("Centroids are not initialised; run centroid init first")
        self.mode = mode

    @torch.no_grad()
    def load_centroids(self, centroids: np.ndarray | torch.Tensor) -> None:
        tensor = torch.as_tensor(np.asarray(centroids), dtype=self.centroids.dtype)
        if tensor.shape != self.centroids.shape:
            raise QuantizerError(
                f"Centroid shape {tuple(tensor.shape)} != {tuple(self.centroids.shape)}"
            )
        self.centroids.copy_(tensor)
        self.initialized.fill_(True)

    def export_codebook(self, k: int) -> tuple[int, int, bytes]:
        """(M, L, row-major float32 centroid bytes) for standalone decoders."""
        values = self.centroids[k].detach().cpu().numpy().astype("<f4")
        return self.num_centroids, self.dim, values.tobytes(order="C")

    def forward(self, codes: list[torch.Tensor]) -> QuantizerOutput:
        if len(codes) != self.num_codebooks:
            raise QuantizerError(f"Expected {self.num_codebooks} source codes, got {len(codes)}")
        if self.mode is QuantMode.off:
            return QuantizerOutput(values=list(codes))

        values: list[torch.Tensor] = []
        probs: list[torch.Tensor] = []
        indices: list[torch.Tensor] = []
        for k, code in enumerate(codes):
            y = code.transpose(-1, -2)  # (B, P, L): one VQ vector per code column
            mu = self.centroids[k]
            if self.mode is QuantMode.soft:
                assignment = soft_assign(y, mu, float(self.alpha))
                probs.append(assignment.p)
                values.append(soft_quantize(assignment.p, mu).transpose(-1, -2))
            else:
                index, value = hard_quantize(y, mu)
                indices.append(index)
                values.append(value.transpose(-1, -2))

        if self.mode is QuantMode.soft:
            return QuantizerOutput(values=values, probs=probs)
        return QuantizerOutput(values=values, indices=indices)

    def dequantize(self, indices: list[torch.Tensor]) -> list[torch.Tensor]:
        """Centroid lookup for hard indices (B, P) per source -> (B, L, P)."""
        return [self.centroids[k][idx].transpose(-1, -2) for k, idx in enumerate(indices)]
