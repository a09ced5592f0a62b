from __future__ import annotations

import dataclasses
import logging
from pathlib import Path

import pytest

from sanac.dsp.framing import FrameSpec
from sanac.services import evaluation
from sanac.services.evaluation import (
    CodecMismatchError,
    EmptyReportError,
    EvaluationError,
    SystemPair,
    evaluate_corpus,
)
from sanac.services.manifest import ManifestRow, Split, read_manifest
from sanac.services.stoi import StoiAdapter

NO_STOI = StoiAdapter(use_default=False)


@pytest.fixture
def pairs(sanac_ckpt, baseline_ckpt) -> list[SystemPair]:
    return [
        SystemPair(xi=1.0, sanac=sanac_ckpt, baseline=baseline_ckpt),
        SystemPair(xi=2.0, sanac=sanac_ckpt, baseline=baseline_ckpt),
    ]


def test_one_row_per_utterance_and_xi(pairs, corpus_manifest):
    rows = read_manifest(corpus_manifest)
    report = evaluate_corpus(pairs, rows, stoi=NO_STOI)
    assert len(report.rows) == len(rows) * 2
    assert [r.utterance_id for r in report.rows[:2]] == [rows[0].utterance_id] * 2
    assert [r.xi for r in report.rows[:2]] == [1.0, 2.0]
    assert not report.stoi_available

    row = report.rows[0]
    assert row.sanac.system == "sanac" and row.baseline.system == "baseline"
    assert row.sanac.bitrate_kbps > 0
    assert len(row.sanac.entropies) == 2 and len(row.baseline.entropies) == 1
    assert row.sanac.sisdr_speech is not None and row.sanac.sisdri_speech is not None
    assert row.baseline.sisdr_speech is None
    assert row.sanac.stoi_mixture is None

    # Huffman code lengths never beat the empirical entropy of the indices they code
    for m in row.by_system():
        assert m.bitrate_kbps * 1000 >= sum(m.entropies) * 8 * 16000 / 12 - 1e-6


def test_same_checkpoints_give_the_same_columns(pairs, corpus_manifest):
    report = evaluate_corpus(pairs, read_manifest(corpus_manifest)[:2], stoi=NO_STOI)
    first, second = report.rows[0], report.rows[1]
    assert first.sanac.sisdr_mixture == second.sanac.sisdr_mixture
    assert first.baseline.bitrate_kbps == second.baseline.bitrate_kbps


def test_workers_keep_manifest_order(pairs, corpus_manifest):
    rows = read_manifest(corpus_manifest)
    serial = evaluate_corpus(pairs, rows, stoi=NO_STOI)
    threaded = evaluate_corpus(pairs, rows, stoi=NO_STOI, num_workers=3)
    assert [r.utterance_id for r in threaded.rows] == [r.utterance_id for r in serial.rows]
    assert [r.sanac.sisdr_mixture for r in threaded.rows] == pytest.approx(
        [r.sanac.sisdr_mixture for r in serial.rows]
    )


def test_stoi_columns_use_the_adapter(pairs, corpus_manifest):
    rows = read_manifest(corpus_manifest)[:1]
    report = evaluate_corpus(pairs, rows, stoi=StoiAdapter(lambda ref, est, fs: 0.5))
    assert report.stoi_available
    row = report.rows[0]
    assert (row.sanac.stoi_mixture, row.sanac.stoi_speech) == (0.5, 0.5)
    assert (row.baseline.stoi_mixture, row.baseline.stoi_speech) == (0.5, None)


def test_snr_filter(pairs, corpus_manifest):
    rows = read_manifest(corpus_manifest)
    snr = rows[0].snr_db
    report = evaluate_corpus(pairs, rows, stoi=NO_STOI, snr_filter=[snr])
    assert len(report.rows) == 2 * sum(r.snr_db == snr for r in rows)
    assert all(r.input_snr_db == snr for r in report.rows)


def test_summary_groups_by_condition(pairs, corpus_manifest):
    rows = read_manifest(corpus_manifest)
    summary = evaluate_corpus(pairs, rows, stoi=NO_STOI).summary()
    snrs = {r.snr_db for r in rows}
    assert len(summary) == 2 * 2 * len(snrs)
    assert sum(s.count for s in summary) == 2 * 2 * len(rows)
    assert all(s.stoi_mixture is None for s in summary)
    assert all(s.sisdr_speech is None for s in summary if s.system == "baseline")


def test_missing_audio_is_skipped(pairs, corpus_manifest, caplog):
    rows = read_manifest(corpus_manifest)[:1]
    ghost = ManifestRow(Path("/nonexistent/ghost.wav"), rows[0].noise_path, 0.0, Split.test)
    with caplog.at_level(logging.WARNING):
        report = evaluate_corpus(pairs, [ghost, *rows], stoi=NO_STOI)
    assert len(report.rows) == 2
    assert "ghost" in caplog.text

    with pytest.raises(EmptyReportError):
        evaluate_corpus(pairs, [ghost], stoi=NO_STOI)


def test_pairs_are_required_and_consistent(sanac_ckpt, baseline_ckpt, corpus_manifest):
    with pytest.raises(EvaluationError):
        evaluate_corpus([], read_manifest(corpus_manifest), stoi=NO_STOI)
    other = dataclasses.replace(baseline_ckpt, frames=FrameSpec(16, 8, 8))
    with pytest.raises(EvaluationError):
        SystemPair(xi=2.0, sanac=sanac_ckpt, baseline=other)


def test_source_decode_mismatch_is_detected(pairs, corpus_manifest, monkeypatch):
    real_decode = evaluation.decode_bitstream

    def swapped_sources(ckpt, data):
        decoded = real_decode(ckpt, data)
        return dataclasses.replace(decoded, sources=tuple(reversed(decoded.sources)))

    monkeypatch.setattr(evaluation, "decode_bitstream", swapped_sources)
    with pytest.raises(CodecMismatchError, match="source"):
        evaluate_corpus(pairs, read_manifest(corpus_manifest)[:1], stoi=NO_STOI)
