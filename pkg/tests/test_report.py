from __future__ import annotations

import csv

import pytest

from sanac.services.evaluation import EvalReport, EvalRow, SystemMetrics
from sanac.services.report import (
    ROW_FIELDS,
    ROWS_FILENAME,
    SUMMARY_FILENAME,
    write_report,
)


def _row(uid: str, xi: float, snr: float, shift: float, stoi: bool) -> EvalRow:
    s = 0.8 if stoi else None
    return EvalRow(
        utterance_id=uid,
        xi=xi,
        input_snr_db=snr,
        sanac=SystemMetrics(
            system="sanac", bitrate_kbps=9.2 * xi, sisdr_mixture=12.0 + shift,
            sisdr_speech=8.0 + shift, sisdri_speech=4.0, stoi_mixture=s, stoi_speech=s,
            entropies=(0.75 * xi, 0.25 * xi),
        ),
        baseline=SystemMetrics(
            system="baseline", bitrate_kbps=9.1 * xi, sisdr_mixture=13.0 + shift,
            stoi_mixture=s, entropies=(xi,),
        ),
    )


def _report(stoi: bool = False) -> EvalReport:
    rows = [
        _row(f"utt{i}", xi, snr, 0.5 * i, stoi)
        for i, snr in enumerate((0.0, 5.0, 0.0, 5.0))
        for xi in (1.0, 2.0)
    ]
    return EvalReport(rows=rows, stoi_available=stoi)


def test_rows_csv_has_one_line_per_system(tmp_path):
    write_report(tmp_path, _report(), plots=False)
    with (tmp_path / ROWS_FILENAME).open(newline="", encoding="utf-8") as f:
        records = list(csv.DictReader(f))
    assert list(records[0]) == ROW_FIELDS
    assert len(records) == 2 * 8
    first = records[0]
    assert (first["system"], first["xi"], first["entropy_2"]) == ("sanac", "1.000000", "0.250000")
    assert records[1]["sisdr_speech"] == ""
    assert records[1]["entropy_2"] == ""
    assert first["stoi_mixture"] == ""


def test_summary_averages_each_condition(tmp_path):
    report = _report()
    summary = report.summary()
    assert len(summary) == 2 * 2 * 2
    sanac = next(s for s in summary if (s.system, s.xi, s.input_snr_db) == ("sanac", 1.0, 0.0))
    # utterances 0 and 2 at 0 dB
    assert sanac.count == 2
    assert sanac.sisdr_mixture == pytest.approx(12.5)
    write_report(tmp_path, report, plots=False)
    lines = (tmp_path / SUMMARY_FILENAME).read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + len(summary)


def test_report_files_are_byte_identical_across_runs(tmp_path):
    a = write_report(tmp_path / "a", _report(stoi=True))
    b = write_report(tmp_path / "b", _report(stoi=True))
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pb in zip(a, b):
        if pa.suffix == ".csv":
            assert pa.read_bytes() == pb.read_bytes()


def test_plots_skip_panels_without_values(tmp_path):
    written = {p.name for p in write_report(tmp_path, _report(stoi=False))}
    assert written == {ROWS_FILENAME, SUMMARY_FILENAME, "sisdr_mixture.png", "sisdri_speech.png"}
    assert (tmp_path / "sisdr_mixture.png").stat().st_size > 0

    written = {p.name for p in write_report(tmp_path / "stoi", _report(stoi=True))}
    assert {"stoi_mixture.png", "stoi_speech.png"} <= written
