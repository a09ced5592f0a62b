from __future__ import annotations

import torch

from sanac.errors import ShapeError


def split_codes(z: torch.Tensor, num_sources: int) -> list[torch.Tensor]:
    """Structured hard mask: source k owns channel rows [kL, (k+1)L) of the code map.

    Works on (K*L, P) or (B, K*L, P); list position is the source index (0 = speech).
    """
    channels = z.shape[-2]
    if channels % num_sources:
        raise ShapeError(f"{channels} code channels cannot be split into {num_sources} sources")
    return list(torch.split(z, channels // num_sources, dim=-2))


def embed_codes(codes: list[torch.Tensor]) -> torch.Tensor:
    if not codes:
        raise ShapeError("No source codes to embed")
    return torch.cat(codes, dim=-2)


def pad_source_code(code: torch.Tensor, source_index: int, num_sources: int) -> torch.Tensor:
    """Zero-padded full-size embedding of one source block (masked code z^(k))."""
    if not 0 <= source_index < num_sources:
        raise ShapeError(f"source_index {source_index} out of range for K={num_sources}")
    blocks = [torch.zeros_like(code) for _ in range(num_sources)]
    blocks[source_index] = code
    return embed_codes(blocks)
