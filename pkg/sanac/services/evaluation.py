from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from sanac.bitstream.stream import encode_stream
from sanac.dsp.audio import AudioError
from sanac.errors import SanacError
from sanac.model.codec import SystemKind
from sanac.quantizer.entropy import count_usage, estimate_entropy
from sanac.services.checkpoint import Checkpoint
from sanac.services.codec_io import build_header, decode_bitstream, decode_indices, encode_indices
from sanac.services.dataset import MixedUtterance, load_utterance
from sanac.services.manifest import ManifestRow
from sanac.services.metrics import sisdr
from sanac.services.stoi import StoiAdapter

logger = logging.getLogger(__name__)


class EvaluationError(SanacError):
    pass


class EmptyReportError(EvaluationError):
    pass


class CodecMismatchError(EvaluationError):
    pass


@dataclass(frozen=True)
class SystemPair:
    """SANAC and baseline checkpoints trained for the same target total entropy xi."""

    xi: float
    sanac: Checkpoint
    baseline: Checkpoint

    def __post_init__(self) -> None:
        if self.sanac.frames != self.baseline.frames:
            raise EvaluationError("Both checkpoints must share the frame configuration")


@dataclass(frozen=True)
class SystemMetrics:
    system: str
    bitrate_kbps: float
    sisdr_mixture: float
    sisdr_speech: float | None = None
    sisdri_speech: float | None = None
    stoi_mixture: float | None = None
    stoi_speech: float | None = None
    entropies: tuple[float, ...] = ()


@dataclass(frozen=True)
class EvalRow:
    utterance_id: str
    xi: float
    input_snr_db: float
    sanac: SystemMetrics
    baseline: SystemMetrics

    def by_system(self) -> tuple[SystemMetrics, SystemMetrics]:
        return self.sanac, self.baseline


@dataclass(frozen=True)
class ConditionSummary:
    system: str
    xi: float
    input_snr_db: float
    count: int
    bitrate_kbps: float
    sisdr_mixture: float
    sisdr_speech: float | None
    sisdri_speech: float | None
    stoi_mixture: float | None
    stoi_speech: float | None


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    stoi_available: bool = False

    def summary(self) -> list[ConditionSummary]:
        """Means over utterances per (system, xi, input SNR), in first-seen order."""
        groups: dict[tuple[str, float, float], list[SystemMetrics]] = defaultdict(list)
        for row in self.rows:
            for metrics in row.by_system():
                groups[(metrics.system, row.xi, row.input_snr_db)].append(metrics)

        def _mean(values: list[float | None]) -> float | None:
            present = [v for v in values if v is not None]
            return float(np.mean(present)) if present else None

        out = []
        for (system, xi, snr), items in groups.items():
            out.append(
                ConditionSummary(
                    system=system,
                    xi=xi,
                    input_snr_db=snr,
                    count=len(items),
                    bitrate_kbps=float(np.mean([m.bitrate_kbps for m in items])),
                    sisdr_mixture=float(np.mean([m.sisdr_mixture for m in items])),
                    sisdr_speech=_mean([m.sisdr_speech for m in items]),
                    sisdri_speech=_mean([m.sisdri_speech for m in items]),
                    stoi_mixture=_mean([m.stoi_mixture for m in items]),
                    stoi_speech=_mean([m.stoi_speech for m in items]),
                )
            )
        return out


def evaluate_system(ckpt: Checkpoint, utt: MixedUtterance, stoi: StoiAdapter) -> SystemMetrics:
    """mixture -> indices -> bitstream bytes -> decode -> overlap-add -> metrics."""
    frames, indices = encode_indices(ckpt, utt.mixture)
    stream = encode_stream(indices, build_header(ckpt, frames))
    decoded = decode_bitstream(ckpt, stream.to_bytes())

    direct = decode_indices(
        ckpt, indices, original_length=frames.original_length, sample_rate=frames.sample_rate
    )
    if not np.array_equal(direct.mixture.samples, decoded.mixture.samples):
        raise CodecMismatchError(
            f"{utt.row.utterance_id}: bitstream decode differs from in-memory decode"
        )
    if len(direct.sources) != len(decoded.sources) or not all(
        np.array_equal(a.samples, b.samples) for a, b in zip(direct.sources, decoded.sources)
    ):
        raise CodecMismatchError(
            f"{utt.row.utterance_id}: bitstream source decode differs from in-memory decode"
        )

    m = ckpt.codec.cfg.num_centroids
    entropies = tuple(
        float(estimate_entropy(c / c.sum()))
        for c in (count_usage(indices[:, k], m) for k in range(indices.shape[1]))
    )
    metrics = dict(
        system=ckpt.system.value,
        bitrate_kbps=stream.measured_bitrate() / 1000.0,
        sisdr_mixture=sisdr(decoded.mixture, utt.mixture),
        stoi_mixture=stoi(decoded.mixture, utt.speech),
        entropies=entropies,
    )
    if ckpt.system is SystemKind.sanac and decoded.sources:
        speech_hat = decoded.sources[0]
        metrics["sisdr_speech"] = sisdr(speech_hat, utt.speech)
        metrics["sisdri_speech"] = metrics["sisdr_speech"] - sisdr(utt.mixture, utt.speech)
        metrics["stoi_speech"] = stoi(speech_hat, utt.speech)
    return SystemMetrics(**metrics)


def evaluate_utterance(
    pairs: Sequence[SystemPair], row: ManifestRow, stoi: StoiAdapter
) -> list[EvalRow] | None:
    try:
        utt = load_utterance(row)
    except (FileNotFoundError, RuntimeError, AudioError) as e:
        logger.warning(f"Skipping {row.utterance_id}: {e}")
        return None
    return [
        EvalRow(
            utterance_id=row.utterance_id,
            xi=pair.xi,
            input_snr_db=row.snr_db,
            sanac=evaluate_system(pair.sanac, utt, stoi),
            baseline=evaluate_system(pair.baseline, utt, stoi),
        )
        for pair in pairs
    ]


def evaluate_corpus(
    pairs: Sequence[SystemPair],
    rows: Sequence[ManifestRow],
    *,
    stoi: StoiAdapter | None = None,
    snr_filter: Sequence[float] | None = None,
    num_workers: int = 0,
) -> EvalReport:
    """One report row per (utterance, xi); rows keep manifest order whatever the worker count."""
    if not pairs:
        raise EvaluationError("No checkpoint pairs to evaluate")
    stoi = stoi or StoiAdapter()
    if snr_filter is not None:
        wanted = {float(s) for s in snr_filter}
        rows = [r for r in rows if r.snr_db in wanted]

    if num_workers > 0:
        with ThreadPoolExecutor(max_workers=num_workers) as pool:
            results = list(pool.map(lambda r: evaluate_utterance(pairs, r, stoi), rows))
    else:
        results = [evaluate_utterance(pairs, r, stoi) for r in rows]

    report = EvalReport(stoi_available=stoi.available)
    for result in results:
        if result:
            report.rows.extend(result)
    if not report.rows:
        raise EmptyReportError("No utterance could be evaluated")
    return report
