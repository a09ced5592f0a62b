from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from sanac.errors import ConfigError


class AlphaSchedule(BaseModel):
    """Softmax scale annealing: alpha grows geometrically per epoch of stage 2+ until alpha_max."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha_start: float = Field(default=10.0, gt=0)
    alpha_max: float = Field(default=500.0, gt=0)
    growth: float = Field(default=(500.0 / 10.0) ** (1.0 / 20.0), gt=1.0)

    @model_validator(mode="after")
    def _check(self) -> AlphaSchedule:
        if self.alpha_max < self.alpha_start:
            raise ConfigError("alpha_max must be >= alpha_start")
        return self

    def value(self, epoch: int) -> float:
        """Alpha for the given epoch counted from quantizer activation (0-based)."""
        if epoch <= 0:
            return self.alpha_start
        return min(self.alpha_max, self.alpha_start * self.growth**epoch)
