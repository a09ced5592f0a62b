from __future__ import annotations

import torch
from torch import nn

from sanac.errors import ShapeError


def conv1d(in_ch: int, out_ch: int, kernel: int, *, stride: int = 1) -> nn.Conv1d:
    """Conv with 'same' padding (odd kernels) and zero-initialised bias."""
    conv = nn.Conv1d(in_ch, out_ch, kernel_size=kernel, stride=stride, padding=kernel // 2)
    nn.init.zeros_(conv.bias)
    return conv


class BottleneckBlock(nn.Module):
    """
    (b, C, T) -> (b, C, T)

    1x1 reduce C -> C_r, kxk conv at C_r, 1x1 expand C_r -> C, identity shortcut.
    """

    def __init__(self, channels: int, reduced: int, kernel: int, leaky_slope: float = 0.01):
        super().__init__()
        self.conv1 = conv1d(channels, reduced, 1)
        self.conv2 = conv1d(reduced, reduced, kernel)
        self.conv3 = conv1d(reduced, channels, 1)
        self.act = nn.LeakyReLU(leaky_slope)
        self.channels = channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2] != self.channels:
            raise ShapeError(f"BottleneckBlock expects {self.channels} channels, got {x.shape[-2]}")
        out = self.act(self.conv1(x))
        out = self.act(self.conv2(out))
        out = self.act(self.conv3(out))
        return out + x


def bottleneck_stack(
    count: int, channels: int, reduced: int, kernel: int, leaky_slope: float
) -> nn.Sequential:
    return nn.Sequential(
        *[BottleneckBlock(channels, reduced, kernel, leaky_slope) for _ in range(count)]
    )


def subpixel_upsample(x: torch.Tensor) -> torch.Tensor:
    """Interlace adjacent channel pairs: (..., C, T) -> (..., C/2, 2T).

    out[c, 2t] = x[2c, t], out[c, 2t + 1] = x[2c + 1, t]
    """
    *lead, channels, length = x.shape
    if channels % 2:
        raise ShapeError(f"subpixel_upsample needs an even channel count, got {channels}")
    x = x.reshape(*lead, channels // 2, 2, length)
    x = x.transpose(-1, -2)
    return x.reshape(*lead, channels // 2, 2 * length)


class SubPixelUpsample(nn.Module):
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return subpixel_upsample(x)
