from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="SANAC_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Where corpora (speech/, noise/) and manifests live by default
    data_root: str = "data"

    # Run directories (checkpoints, training log, reports)
    runs_root: str = "runs"

    log_level: str = "INFO"

    # Parallel workers for per-utterance evaluation (0 = in-process)
    num_workers: int = 0

    @property
    def data_path(self) -> Path:
        return Path(self.data_root)

    @property
    def runs_path(self) -> Path:
        return Path(self.runs_root)


@lru_cache
def get_settings() -> Settings:
    return Settings()
