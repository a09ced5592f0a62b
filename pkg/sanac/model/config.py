from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from sanac.errors import ConfigError


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    frame_size: int = Field(default=512, gt=0)  # N
    code_length: int = Field(default=256, gt=0)  # P
    vq_dim: int = Field(default=6, gt=0)  # L
    num_sources: int = Field(default=2, ge=2)  # K
    num_centroids: int = Field(default=128, ge=2)  # M
    trunk_channels: int = Field(default=30, gt=0)
    bottleneck_channels: int = Field(default=10, gt=0)
    transform_channels: int = Field(default=60, gt=0)
    conv_kernel: int = Field(default=9, gt=0)
    num_bottlenecks: int = Field(default=2, ge=1)
    leaky_slope: float = Field(default=0.01, ge=0.0)

    @model_validator(mode="after")
    def _check_geometry(self) -> ModelConfig:
        if self.conv_kernel % 2 != 1:
            raise ConfigError("conv_kernel must be odd for 'same' padding")
        if self.frame_size != 2 * self.code_length:
            raise ConfigError("code_length must be frame_size / 2")
        if self.transform_channels != self.num_sources * self.trunk_channels:
            raise ConfigError("transform_channels must equal num_sources * trunk_channels")
        if self.code_dim % self.num_sources:
            raise ConfigError("code dimension must be divisible by num_sources")
        return self

    @property
    def code_channels(self) -> int:
        """Channels of the full code map (K blocks of L)."""
        return self.num_sources * self.vq_dim

    @property
    def code_dim(self) -> int:
        return self.code_channels * self.code_length

    @property
    def padding(self) -> int:
        return self.conv_kernel // 2
