from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from sanac.services.evaluation import ConditionSummary, EvalReport, SystemMetrics

logger = logging.getLogger(__name__)

ROWS_FILENAME = "utterances.csv"
SUMMARY_FILENAME = "summary.csv"

ROW_FIELDS = [
    "utterance_id",
    "xi",
    "input_snr_db",
    "system",
    "bitrate_kbps",
    "entropy_1",
    "entropy_2",
    "sisdr_mixture",
    "sisdr_speech",
    "sisdri_speech",
    "stoi_mixture",
    "stoi_speech",
]

SUMMARY_FIELDS = [
    "system",
    "xi",
    "input_snr_db",
    "count",
    "bitrate_kbps",
    "sisdr_mixture",
    "sisdr_speech",
    "sisdri_speech",
    "stoi_mixture",
    "stoi_speech",
]


@dataclass(frozen=True)
class Panel:
    filename: str
    title: str
    field: str
    systems: tuple[str, ...]


_BOTH = ("sanac", "baseline")

PANELS = (
    Panel("stoi_mixture.png", "STOI, recovered mixture", "stoi_mixture", _BOTH),
    Panel("stoi_speech.png", "STOI, recovered speech", "stoi_speech", ("sanac",)),
    Panel("sisdr_mixture.png", "SiSDR, recovered mixture (dB)", "sisdr_mixture", _BOTH),
    Panel("sisdri_speech.png", "SiSDRi, recovered speech (dB)", "sisdri_speech", ("sanac",)),
)


def _fmt(value: float | int | str | None) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _metric_row(utterance_id: str, xi: float, snr: float, m: SystemMetrics) -> list[str]:
    entropies = list(m.entropies) + [None, None]
    return [
        _fmt(v)
        for v in (
            utterance_id,
            float(xi),
            float(snr),
            m.system,
            m.bitrate_kbps,
            entropies[0],
            entropies[1],
            m.sisdr_mixture,
            m.sisdr_speech,
            m.sisdri_speech,
            m.stoi_mixture,
            m.stoi_speech,
        )
    ]


def write_rows_csv(path: str | Path, report: EvalReport) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROW_FIELDS)
        for row in report.rows:
            for m in row.by_system():
                writer.writerow(_metric_row(row.utterance_id, row.xi, row.input_snr_db, m))
    return path


def write_summary_csv(path: str | Path, summary: list[ConditionSummary]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_FIELDS)
        for s in summary:
            writer.writerow([_fmt(getattr(s, f)) for f in SUMMARY_FIELDS])
    return path


def _plot_panel(path: Path, panel: Panel, summary: list[ConditionSummary]) -> bool:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # (system, xi) -> snr -> value
    series: dict[tuple[str, float], dict[float, float]] = defaultdict(dict)
    for s in summary:
        value = getattr(s, panel.field)
        if s.system in panel.systems and value is not None:
            series[(s.system, s.xi)][s.input_snr_db] = value
    if not series:
        logger.warning(f"No values for panel {panel.field}; skipped")
        return False

    snrs = sorted({snr for values in series.values() for snr in values})
    keys = sorted(series, key=lambda k: (k[1], k[0]))
    width = 0.8 / len(keys)

    fig, ax = plt.subplots(figsize=(7, 4), constrained_layout=True)
    for i, key in enumerate(keys):
        system, xi = key
        xs = [j + (i - (len(keys) - 1) / 2) * width for j in range(len(snrs))]
        ys = [series[key].get(snr, float("nan")) for snr in snrs]
        ax.bar(xs, ys, width=width, label=f"{system}, xi={xi:g}")
    ax.set_xticks(range(len(snrs)))
    ax.set_xticklabels([f"{snr:g} dB" for snr in snrs])
    ax.set_xlabel("Input SNR")
    ax.set_title(panel.title)
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return True


def write_report(out_dir: str | Path, report: EvalReport, *, plots: bool = True) -> list[Path]:
    """utterances.csv + summary.csv, then one PNG per panel that has data."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = report.summary()
    written = [
        write_rows_csv(out_dir / ROWS_FILENAME, report),
        write_summary_csv(out_dir / SUMMARY_FILENAME, summary),
    ]
    if not report.stoi_available:
        logger.warning("STOI unavailable; STOI columns left empty")
    if plots:
        for panel in PANELS:
            path = out_dir / panel.filename
            if _plot_panel(path, panel, summary):
                written.append(path)
    logger.info(f"Report written to {out_dir} ({len(report.rows)} rows)")
    return written
