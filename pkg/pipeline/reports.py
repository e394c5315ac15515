"""
CSV reports. No timestamps or run ids go into these files, so a rerun
with the same config and seed reproduces them byte for byte.

summary.csv columns:
    label, method, count, median_iou, iqr_iou, median_centroid_offset,
    baseline_method, baseline_count, baseline_median_iou, baseline_iqr_iou,
    sign_positive, sign_negative, sign_ties, p_value, mask_percentile
records.csv columns:
    label, method, source_id, seed, target_class, steps_k, iou,
    centroid_offset, blank, role        (role is "study" or "baseline")
extras.csv: union of the study's extra columns, in first-seen order.
"""

import csv
import io
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

from pipeline.evaluation import EvalReport, RecordMetrics

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "label", "method", "count", "median_iou", "iqr_iou", "median_centroid_offset",
    "baseline_method", "baseline_count", "baseline_median_iou", "baseline_iqr_iou",
    "sign_positive", "sign_negative", "sign_ties", "p_value", "mask_percentile",
]
RECORD_COLUMNS = [
    "label", "method", "source_id", "seed", "target_class", "steps_k", "iou", "centroid_offset", "blank", "role",
]


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def csv_text(columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buffer.getvalue()


def summary_row(report: EvalReport) -> Dict[str, Any]:
    return {
        "label": report.label,
        "method": report.summary.method,
        "count": report.summary.count,
        "median_iou": report.summary.median_iou,
        "iqr_iou": report.summary.iqr_iou,
        "median_centroid_offset": report.summary.median_centroid_offset,
        "baseline_method": report.baseline.method,
        "baseline_count": report.baseline.count,
        "baseline_median_iou": report.baseline.median_iou,
        "baseline_iqr_iou": report.baseline.iqr_iou,
        "sign_positive": report.sign_test.positive,
        "sign_negative": report.sign_test.negative,
        "sign_ties": report.sign_test.ties,
        "p_value": report.sign_test.p_value,
        "mask_percentile": report.mask_percentile,
    }


def record_rows(report: EvalReport) -> List[Dict[str, Any]]:
    def row(metrics: RecordMetrics, role: str) -> Dict[str, Any]:
        return {**metrics.model_dump(), "label": report.label, "role": role}

    return [row(m, "study") for m in report.rows] + [row(m, "baseline") for m in report.baseline_rows]


def extra_columns(extras: Sequence[Dict[str, Any]]) -> List[str]:
    columns: List[str] = []
    for row in extras:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def summary_text(command: str, reports: Sequence[EvalReport], notes: Sequence[str] = ()) -> str:
    lines = [f"{command}: {len(reports)} report(s)", ""]
    for r in reports:
        lines.append(
            f"{r.label:<28} median IoU {r.summary.median_iou:.4f} (IQR {r.summary.iqr_iou:.4f}, n={r.summary.count})"
            f"  vs {r.baseline.method} {r.baseline.median_iou:.4f}"
            f"  sign test +{r.sign_test.positive}/-{r.sign_test.negative}/={r.sign_test.ties}"
            f" p={r.sign_test.p_value:.4g}"
        )
    lines.extend(notes)
    return "\n".join(lines) + "\n"


def write_reports(out_dir, command: str, reports: Sequence[EvalReport],
                  extras: Sequence[Dict[str, Any]] = (), notes: Sequence[str] = ()) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "summary": out_dir / "summary.csv",
        "records": out_dir / "records.csv",
        "text": out_dir / "summary.txt",
    }
    files["summary"].write_text(csv_text(SUMMARY_COLUMNS, [summary_row(r) for r in reports]), encoding="utf-8")
    files["records"].write_text(
        csv_text(RECORD_COLUMNS, [row for r in reports for row in record_rows(r)]), encoding="utf-8"
    )
    if extras:
        files["extras"] = out_dir / "extras.csv"
        files["extras"].write_text(csv_text(extra_columns(extras), extras), encoding="utf-8")
    files["text"].write_text(summary_text(command, reports, notes), encoding="utf-8")
    logger.info(f"Wrote {command} reports to {out_dir}")
    return files
