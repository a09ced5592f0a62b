from __future__ import annotations

import abc
import enum
from dataclasses import dataclass

import torch
from torch import nn

from sanac.errors import ShapeError
from sanac.model.blocks import SubPixelUpsample, bottleneck_stack, conv1d
from sanac.model.codes import split_codes
from sanac.model.config import ModelConfig
from sanac.quantizer.vq import QuantizerOutput, SoftToHardQuantizer


class SystemKind(str, enum.Enum):
    sanac = "sanac"
    baseline = "baseline"


@dataclass
class CodecOutput:
    code_map: torch.Tensor  # (B, code channels, P)
    quantized: QuantizerOutput
    mixture: torch.Tensor  # (B, N)
    sources: torch.Tensor | None = None  # (B, K, N); None for the baseline


class Encoder(nn.Module):
    """
    (B, N) -> (B, out_channels, N/2)

    input lift 1 -> C, bottlenecks, strided downsampling, bottleneck, channel change C -> out.
    """

    def __init__(self, cfg: ModelConfig, out_channels: int):
        super().__init__()
        c, cr, k, slope = (
            cfg.trunk_channels,
            cfg.bottleneck_channels,
            cfg.conv_kernel,
            cfg.leaky_slope,
        )
        self.cfg = cfg
        self.input_conv = conv1d(1, c, k)
        self.pre_blocks = bottleneck_stack(cfg.num_bottlenecks, c, cr, k, slope)
        self.downsample = conv1d(c, c, k, stride=2)
        self.post_blocks = bottleneck_stack(1, c, cr, k, slope)
        self.code_conv = conv1d(c, out_channels, k)
        self.act = nn.LeakyReLU(slope)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        if frames.dim() == 1:
            frames = frames.unsqueeze(0)
        if frames.shape[-1] != self.cfg.frame_size:
            raise ShapeError(
                f"Frame length {frames.shape[-1]} != frame_size {self.cfg.frame_size}"
            )
        h = self.act(self.input_conv(frames.unsqueeze(1)))
        h = self.pre_blocks(h)
        h = self.act(self.downsample(h))
        if h.shape[-1] != self.cfg.code_length:
            raise ShapeError(f"Downsampled length {h.shape[-1]} != {self.cfg.code_length}")
        h = self.post_blocks(h)
        return self.code_conv(h)


class SourceDecoder(nn.Module):
    """(B, C, N) -> (B, N); one parameter set shared by every source."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.blocks = bottleneck_stack(
            cfg.num_bottlenecks,
            cfg.trunk_channels,
            cfg.bottleneck_channels,
            cfg.conv_kernel,
            cfg.leaky_slope,
        )
        self.projection = conv1d(cfg.trunk_channels, 1, cfg.conv_kernel)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        return self.projection(self.blocks(h)).squeeze(-2)


class _CodecBase(nn.Module, abc.ABC):
    kind: SystemKind

    def __init__(self, cfg: ModelConfig, num_codebooks: int):
        super().__init__()
        self.cfg = cfg
        self.num_codebooks = num_codebooks
        self.encoder = Encoder(cfg, num_codebooks * cfg.vq_dim)
        self.quantizer = SoftToHardQuantizer(num_codebooks, cfg.num_centroids, cfg.vq_dim)
        self.upsample = SubPixelUpsample()
        self.act = nn.LeakyReLU(cfg.leaky_slope)

    def encode(self, frames: torch.Tensor) -> torch.Tensor:
        return self.encoder(frames)

    def split(self, code_map: torch.Tensor) -> list[torch.Tensor]:
        return split_codes(code_map, self.num_codebooks)

    def _check_codes(self, codes: list[torch.Tensor]) -> None:
        if len(codes) != self.num_codebooks:
            raise ShapeError(f"Expected {self.num_codebooks} source codes, got {len(codes)}")
        for code in codes:
            if tuple(code.shape[-2:]) != (self.cfg.vq_dim, self.cfg.code_length):
                raise ShapeError(
                    f"Source code shape {tuple(code.shape[-2:])} != "
                    f"({self.cfg.vq_dim}, {self.cfg.code_length})"
                )

    def _lift(self, conv: nn.Conv1d, code: torch.Tensor) -> torch.Tensor:
        """(B, L, P) -> channel change to 2C -> sub-pixel -> (B, C, N)."""
        if code.dim() == 2:
            code = code.unsqueeze(0)
        h = self.upsample(self.act(conv(code)))
        if tuple(h.shape[-2:]) != (self.cfg.trunk_channels, self.cfg.frame_size):
            raise ShapeError(f"Upsampled map {tuple(h.shape[-2:])} has the wrong shape")
        return h

    def decode_indices(self, indices: list[torch.Tensor]):
        return self.decode(self.quantizer.dequantize(indices))

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    @abc.abstractmethod
    def decode(self, codes: list[torch.Tensor]): ...

    @abc.abstractmethod
    def forward(self, frames: torch.Tensor) -> CodecOutput: ...


class SourceAwareCodec(_CodecBase):
    """Encoder with a K-block code map, per-source quantization and K shared-decoder passes."""

    kind = SystemKind.sanac

    def __init__(self, cfg: ModelConfig):
        super().__init__(cfg, cfg.num_sources)
        c2 = 2 * cfg.trunk_channels
        self.channel_change = nn.ModuleList(
            [conv1d(cfg.vq_dim, c2, cfg.conv_kernel) for _ in range(cfg.num_sources)]
        )
        self.transform = bottleneck_stack(
            2,
            cfg.transform_channels,
            cfg.num_sources * cfg.bottleneck_channels,
            cfg.conv_kernel,
            cfg.leaky_slope,
        )
        self.decoder = SourceDecoder(cfg)

    def decode(self, codes: list[torch.Tensor]) -> tuple[torch.Tensor, torch.Tensor]:
        """Quantized source codes -> (sources (B, K, N), mixture (B, N))."""
        self._check_codes(codes)
        lifted = [self._lift(conv, code) for conv, code in zip(self.channel_change, codes)]
        joint = self.transform(torch.cat(lifted, dim=-2))
        per_source = torch.split(joint, self.cfg.trunk_channels, dim=-2)
        sources = torch.stack([self.decoder(h) for h in per_source], dim=-2)
        return sources, sources.sum(dim=-2)

    def forward(self, frames: torch.Tensor) -> CodecOutput:
        code_map = self.encode(frames)
        quantized = self.quantizer(self.split(code_map))
        sources, mixture = self.decode(quantized.values)
        return CodecOutput(
            code_map=code_map, quantized=quantized, mixture=mixture, sources=sources
        )


class BaselineCodec(_CodecBase):
    """Same trunk, a single L x P mixture code and one decoder pass."""

    kind = SystemKind.baseline

    def __init__(self, cfg: ModelConfig):
        super().__init__(cfg, 1)
        self.channel_change = conv1d(cfg.vq_dim, 2 * cfg.trunk_channels, cfg.conv_kernel)
        self.transform = bottleneck_stack(
            2, cfg.trunk_channels, cfg.bottleneck_channels, cfg.conv_kernel, cfg.leaky_slope
        )
        self.decoder = SourceDecoder(cfg)

    def decode(self, codes: list[torch.Tensor]) -> tuple[None, torch.Tensor]:
        self._check_codes(codes)
        h = self.transform(self._lift(self.channel_change, codes[0]))
        return None, self.decoder(h)

    def forward(self, frames: torch.Tensor) -> CodecOutput:
        code_map = self.encode(frames)
        quantized = self.quantizer(self.split(code_map))
        _, mixture = self.decode(quantized.values)
        return CodecOutput(code_map=code_map, quantized=quantized, mixture=mixture)


def build_codec(kind: SystemKind | str, cfg: ModelConfig) -> SourceAwareCodec | BaselineCodec:
    kind = SystemKind(kind)
    if kind is SystemKind.sanac:
        return SourceAwareCodec(cfg)
    return BaselineCodec(cfg)
