import json
import logging
import math
from typing import Any, Mapping, Optional, Sequence

from database.database import get_session_local, init_db
from database.models import RecordRow, ReportRow, Run
from pipeline.evaluation import EvalReport
from pipeline.reports import record_rows

logger = logging.getLogger(__name__)


def _real(value: Optional[float]) -> Optional[float]:
    if value is None or math.isnan(value):
        return None
    return float(value)


def register_run(command: str, seed: int, config: Mapping[str, Any], out_dir: str,
                 reports: Sequence[EvalReport] = ()) -> Optional[str]:
    """Store a CLI run and its report rows; returns the run id, or None when the registry is unavailable"""
    try:
        init_db()
        SessionLocal = get_session_local()
        db = SessionLocal()
        try:
            run = Run(command=command, seed=seed, config_json=json.dumps(dict(config), sort_keys=True),
                      out_dir=str(out_dir))
            position = 0
            for index, report in enumerate(reports):
                run.reports.append(ReportRow(
                    position=index,
                    label=report.label,
                    method=report.summary.method,
                    count=report.summary.count,
                    median_iou=_real(report.summary.median_iou),
                    iqr_iou=_real(report.summary.iqr_iou),
                    median_centroid_offset=_real(report.summary.median_centroid_offset),
                    baseline_median_iou=_real(report.baseline.median_iou),
                    sign_positive=report.sign_test.positive,
                    sign_negative=report.sign_test.negative,
                    sign_ties=report.sign_test.ties,
                    p_value=_real(report.sign_test.p_value),
                ))
                for row in record_rows(report):
                    run.records.append(RecordRow(
                        position=position,
                        label=row["label"],
                        method=row["method"],
                        role=row["role"],
                        source_id=row["source_id"],
                        seed=row["seed"],
                        target_class=row["target_class"],
                        steps_k=row["steps_k"],
                        iou=_real(row["iou"]),
                        centroid_offset=_real(row["centroid_offset"]),
                        blank=row["blank"],
                    ))
                    position += 1
            db.add(run)
            db.commit()
            logger.info(f"Registered {command} run {run.id}")
            return run.id
        finally:
            db.close()
    except Exception as e:
        logger.warning(f"Could not register {command} run: {e}")
        return None
