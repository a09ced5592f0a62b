from __future__ import annotations

import csv
import enum
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sanac.errors import SanacError

logger = logging.getLogger(__name__)

FIELDS = ("speech_path", "noise_path", "snr_db", "split")


class ManifestError(SanacError):
    pass


class InsufficientUtterances(ManifestError):
    pass


class Split(str, enum.Enum):
    train = "train"
    val = "val"
    test = "test"


@dataclass(frozen=True)
class ManifestRow:
    speech_path: Path
    noise_path: Path
    snr_db: float
    split: Split

    @property
    def utterance_id(self) -> str:
        return f"{self.speech_path.stem}+{self.noise_path.stem}@{self.snr_db:g}dB"


@dataclass(frozen=True)
class SplitSizes:
    train: int
    test: int
    val: int = 0

    @property
    def total(self) -> int:
        return self.train + self.val + self.test


def read_manifest(path: str | Path) -> list[ManifestRow]:
    """Rows in file order; relative paths resolve against the manifest's directory."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"Manifest not found: {path}")
    base = path.parent
    rows: list[ManifestRow] = []
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = set(FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ManifestError(f"{path}: missing columns {sorted(missing)}")
        for line_no, rec in enumerate(reader, start=2):
            try:
                rows.append(
                    ManifestRow(
                        speech_path=_resolve(base, rec["speech_path"]),
                        noise_path=_resolve(base, rec["noise_path"]),
                        snr_db=float(rec["snr_db"]),
                        split=Split(rec["split"].strip()),
                    )
                )
            except ValueError as e:
                raise ManifestError(f"{path}:{line_no}: {e}") from e
    return rows


def _resolve(base: Path, value: str) -> Path:
    p = Path(value.strip())
    return p if p.is_absolute() else base / p


def write_manifest(path: str | Path, rows: Sequence[ManifestRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(FIELDS)
        for row in rows:
            writer.writerow(
                [_relative(base, row.speech_path), _relative(base, row.noise_path),
                 f"{row.snr_db:g}", row.split.value]
            )
    return path


def _relative(base: Path, p: Path) -> str:
    try:
        return Path(p).resolve().relative_to(base).as_posix()
    except ValueError:
        return Path(p).resolve().as_posix()


def rows_for(rows: Sequence[ManifestRow], split: Split | str) -> list[ManifestRow]:
    split = Split(split)
    return [r for r in rows if r.split is split]


def list_wavs(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ManifestError(f"Not a directory: {directory}")
    return sorted(p for p in directory.rglob("*") if p.suffix.lower() == ".wav")


def prepare_manifest(
    speech_dir: str | Path,
    noise_dir: str | Path,
    *,
    snr_list: Sequence[float],
    sizes: SplitSizes,
    seed: int,
) -> list[ManifestRow]:
    """Randomly pick utterances for each split and pair each with a noise file and SNR."""
    speech = list_wavs(speech_dir)
    noise = list_wavs(noise_dir)
    if not noise:
        raise ManifestError(f"No noise WAVs under {noise_dir}")
    if not snr_list:
        raise ManifestError("At least one SNR level is required")
    if len(speech) < sizes.total:
        raise InsufficientUtterances(
            f"Need {sizes.total} utterances ({sizes.train} train + {sizes.val} val + "
            f"{sizes.test} test) but found {len(speech)}; short by {sizes.total - len(speech)}"
        )

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(speech))[: sizes.total]
    splits = [Split.train] * sizes.train + [Split.val] * sizes.val + [Split.test] * sizes.test

    rows = []
    for idx, split in zip(order, splits):
        rows.append(
            ManifestRow(
                speech_path=speech[int(idx)],
                noise_path=noise[int(rng.integers(len(noise)))],
                snr_db=float(snr_list[int(rng.integers(len(snr_list)))]),
                split=split,
            )
        )
    logger.info(
        f"Prepared manifest: {sizes.train} train / {sizes.val} val / {sizes.test} test rows"
    )
    return rows


def hold_out_validation(
    rows: Sequence[ManifestRow], *, fraction: float, seed: int
) -> tuple[list[ManifestRow], list[ManifestRow]]:
    """Deterministically move a fraction of training rows to validation (at least one)."""
    train = [r for r in rows if r.split is Split.train]
    if len(train) < 2:
        raise ManifestError("Need at least two training rows to hold out validation")
    n_val = min(len(train) - 1, max(1, int(round(fraction * len(train)))))
    picked = set(np.random.default_rng(seed).permutation(len(train))[:n_val].tolist())
    kept = [r for i, r in enumerate(train) if i not in picked]
    val = [
        ManifestRow(r.speech_path, r.noise_path, r.snr_db, Split.val)
        for i, r in enumerate(train)
        if i in picked
    ]
    return kept, val
