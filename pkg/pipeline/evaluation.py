import logging
import math
import warnings
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import stats

from diffusion.sampling import EpsilonPredictor, sample_loop
from diffusion.schedule import NoiseSchedule
from errors import ContractViolation, ShapeMismatch
from nets.classifier import Classifier
from noise_synthesis.saliency import DEFAULT_MASK_PERCENTILE
from pipeline.dataset import to_image_range
from pipeline.generation import GenerationRecord, localization_metrics

logger = logging.getLogger(__name__)


class RecordMetrics(BaseModel):
    label: str
    method: str
    source_id: str
    seed: int
    target_class: int
    steps_k: int
    iou: float
    centroid_offset: float
    blank: bool


class MethodSummary(BaseModel):
    method: str
    count: int
    median_iou: float
    iqr_iou: float
    median_centroid_offset: float


class SignTest(BaseModel):
    """One-sided: are record IoUs larger than their paired baseline IoUs?"""

    positive: int
    negative: int
    ties: int
    p_value: float


class EvalReport(BaseModel):
    label: str
    mask_percentile: float
    rows: List[RecordMetrics]
    baseline_rows: List[RecordMetrics]
    summary: MethodSummary
    baseline: MethodSummary
    sign_test: SignTest


def record_metrics(record: GenerationRecord, percentile: float) -> RecordMetrics:
    m = localization_metrics(record.noise.values, record.output, percentile)
    return RecordMetrics(
        label=record.label,
        method=record.method,
        source_id=record.source_id,
        seed=record.noise.seed,
        target_class=record.target_class,
        steps_k=record.noise.steps_k,
        iou=m.saliency_iou,
        centroid_offset=m.centroid_offset,
        blank=m.blank,
    )


def _nan_median(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0 or np.all(np.isnan(arr)):
        return math.nan
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return float(np.nanmedian(arr))


def summarize(rows: Sequence[RecordMetrics], method: Optional[str] = None) -> MethodSummary:
    """Median and interquartile range of IoU, median centroid offset"""
    if not rows:
        raise ContractViolation("cannot summarize an empty set of records")
    ious = np.array([r.iou for r in rows], dtype=np.float64)
    q1, q3 = np.percentile(ious, [25, 75])
    return MethodSummary(
        method=method or rows[0].method,
        count=len(rows),
        median_iou=float(np.median(ious)),
        iqr_iou=float(q3 - q1),
        median_centroid_offset=_nan_median([r.centroid_offset for r in rows]),
    )


def sign_test(values: Sequence[float], baseline: Sequence[float]) -> SignTest:
    """Paired by position over the common length; ties are dropped"""
    if len(values) != len(baseline):
        logger.warning(f"sign test pairs {min(len(values), len(baseline))} of {len(values)}/{len(baseline)} values")
    n = min(len(values), len(baseline))
    diff = np.asarray(values[:n], dtype=np.float64) - np.asarray(baseline[:n], dtype=np.float64)
    positive = int(np.count_nonzero(diff > 0))
    negative = int(np.count_nonzero(diff < 0))
    ties = n - positive - negative
    trials = positive + negative
    p_value = 1.0 if trials == 0 else float(stats.binomtest(positive, trials, 0.5, alternative="greater").pvalue)
    return SignTest(positive=positive, negative=negative, ties=ties, p_value=p_value)


def evaluate_localization(records: Sequence[GenerationRecord], baseline_records: Sequence[GenerationRecord],
                          mask_percentile: float = DEFAULT_MASK_PERCENTILE, label: str = "") -> EvalReport:
    """Localization of ``records`` against the paired Gaussian-noise baseline"""
    if not records or not baseline_records:
        raise ContractViolation("evaluate_localization needs nonempty record and baseline lists")
    shape = records[0].output.shape
    for r in list(records) + list(baseline_records):
        if r.output.shape != shape:
            raise ShapeMismatch("evaluate_localization", r.output.shape, shape)
    rows = [record_metrics(r, mask_percentile) for r in records]
    baseline_rows = [record_metrics(r, mask_percentile) for r in baseline_records]
    report = EvalReport(
        label=label or rows[0].label,
        mask_percentile=mask_percentile,
        rows=rows,
        baseline_rows=baseline_rows,
        summary=summarize(rows),
        baseline=summarize(baseline_rows),
        sign_test=sign_test([r.iou for r in rows], [r.iou for r in baseline_rows]),
    )
    logger.info(
        f"{report.label}: median IoU {report.summary.median_iou:.4f} vs baseline "
        f"{report.baseline.median_iou:.4f} (p={report.sign_test.p_value:.4g}, n={len(rows)})"
    )
    return report


def sample_class_accuracy(den: EpsilonPredictor, sched: NoiseSchedule, clf: Classifier, samples_per_class: int,
                          seed: int, image_shape: Tuple[int, int]) -> Dict[int, float]:
    """Fraction of class-conditional samples the classifier assigns to their conditioning class"""
    if samples_per_class < 1:
        raise ContractViolation(f"samples_per_class must be positive, got {samples_per_class}")
    result = {}
    for c in range(clf.num_classes):
        finals = []
        for i in range(samples_per_class):
            traj = sample_loop(den, sched, c, seed=seed + c * samples_per_class + i,
                               image_shape=image_shape, snapshot_steps=[])
            finals.append(np.clip(to_image_range(traj.final), 0.0, 1.0))
        predicted = clf.predict(np.stack(finals))
        result[c] = float(np.mean(predicted == c))
        logger.info(f"class {c}: {result[c]:.3f} of {samples_per_class} samples classified correctly")
    return result
