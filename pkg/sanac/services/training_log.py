from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from sqlalchemy import select
from sqlalchemy.orm import Session, sessionmaker

from sanac.db.models import EpochRecord, RunStatus, TrainingRun
from sanac.db.session import create_engine, create_session_factory, sqlite_url
from sanac.errors import TrainingError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochSummary:
    epoch: int
    stage: int
    train_loss: float
    val_loss: float
    mse_mixture: float
    mse_speech: float | None
    entropies: tuple[float, ...]
    alpha: float | None


class TrainingLog:
    """Append-only epoch records for one run, kept in a SQLite file inside the run directory."""

    def __init__(self, session_factory: sessionmaker[Session]):
        self._session_factory = session_factory
        self._run_id: int | None = None

    @classmethod
    def open(cls, path: str | Path) -> TrainingLog:
        engine = create_engine(sqlite_url(path))
        return cls(create_session_factory(engine))

    @property
    def run_id(self) -> int | None:
        return self._run_id

    def start_run(self, *, system: str, seed: int, config_json: str) -> int:
        with self._session_factory() as session:
            run = TrainingRun(system=system, seed=seed, config_json=config_json)
            session.add(run)
            session.commit()
            self._run_id = run.id
        return self._run_id

    def log_epoch(self, summary: EpochSummary) -> None:
        if self._run_id is None:
            raise TrainingError("start_run() must be called before log_epoch()")
        h = list(summary.entropies) + [None, None]
        try:
            with self._session_factory() as session:
                session.add(
                    EpochRecord(
                        run_id=self._run_id,
                        epoch=summary.epoch,
                        stage=summary.stage,
                        train_loss=summary.train_loss,
                        val_loss=summary.val_loss,
                        mse_mixture=summary.mse_mixture,
                        mse_speech=summary.mse_speech,
                        entropy_1=h[0],
                        entropy_2=h[1],
                        alpha=summary.alpha,
                    )
                )
                session.commit()
        except Exception as e:  # noqa: BLE001
            logger.warning(f"Failed to write epoch record to training log: {e}")

    def finish(
        self, *, status: RunStatus, best_checkpoint: str | None = None, error: str | None = None
    ) -> None:
        if self._run_id is None:
            return
        with self._session_factory() as session:
            run = session.get(TrainingRun, self._run_id)
            if run:
                run.status = status
                run.best_checkpoint = best_checkpoint
                run.error = error[:2000] if error else None
                run.finished_at = datetime.now(timezone.utc)
            session.commit()

    def epochs(self) -> list[EpochRecord]:
        with self._session_factory() as session:
            result = session.execute(
                select(EpochRecord)
                .where(EpochRecord.run_id == self._run_id)
                .order_by(EpochRecord.epoch)
            )
            return list(result.scalars().all())
