"""
Study runners.

A study is a list of cells, each one (source image, seed). Cells are
independent and may run on a thread pool; results are always assembled
in cell order, so reports do not depend on ``workers``.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from autodiff import precision
from diffusion.sampling import EpsilonPredictor
from diffusion.schedule import NoiseSchedule
from errors import ContractViolation
from nets.classifier import Classifier
from noise_synthesis.inversion import invert_gradients
from noise_synthesis.manipulations import apply_manipulations, manipulate_points
from noise_synthesis.models import NoiseMethod, SaliencyNoise
from noise_synthesis.saliency import feature_map_saliency, fgsm_map
from noise_synthesis.standardize import gaussian_baseline, make_saliency_noise
from pipeline.config import StudyConfig
from pipeline.dataset import ShapesDataset, select_sources
from pipeline.evaluation import EvalReport, evaluate_localization
from pipeline.generation import (
    GenerationConfig,
    GenerationRecord,
    generate_from_noise,
    object_saliency_noise,
    saliency_noise_from_snapshot,
    target_gradient,
)

logger = logging.getLogger(__name__)

R = TypeVar("R")

BASELINE_LABEL = "baseline"


@dataclass(frozen=True)
class StudyCell:
    index: int
    source_index: int
    source_id: str
    source_class: int
    seed: int


@dataclass
class StudyContext:
    config: StudyConfig
    data: ShapesDataset
    clf: Classifier
    den: EpsilonPredictor
    sched: NoiseSchedule

    def source_image(self, cell: StudyCell) -> np.ndarray:
        return self.data.images[cell.source_index]

    @property
    def image_shape(self) -> Tuple[int, int]:
        return self.data.images.shape[1], self.data.images.shape[2]


@dataclass
class StudyResult:
    command: str
    reports: List[EvalReport] = field(default_factory=list)
    extras: List[Dict[str, Any]] = field(default_factory=list)
    records: List[GenerationRecord] = field(default_factory=list)


def build_cells(cfg: StudyConfig, data: ShapesDataset) -> List[StudyCell]:
    """``cfg.study_cells`` cells over class-balanced sources, seeds seed, seed+1, ..."""
    sources = select_sources(data, cfg.study_cells, cfg.seed)
    cells = []
    for i in range(cfg.study_cells):
        src = sources[i % len(sources)]
        cells.append(StudyCell(i, src, data.source_id(src), int(data.labels[src]), cfg.seed + i))
    return cells


def map_cells(fn: Callable[[StudyCell], R], cells: Sequence[StudyCell], workers: int, precision_name: str) -> List[R]:
    def run(cell: StudyCell) -> R:
        with precision(precision_name):
            logger.info(f"cell {cell.index + 1}/{len(cells)}: {cell.source_id} seed={cell.seed}")
            return fn(cell)

    if workers <= 1 or len(cells) <= 1:
        return [run(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, cells))


def _generation_config(ctx: StudyContext, cell: StudyCell) -> GenerationConfig:
    return ctx.config.generation_config(cell.seed)


def baseline_records(ctx: StudyContext, cell: StudyCell, gen: GenerationConfig) -> List[GenerationRecord]:
    noise = gaussian_baseline(ctx.image_shape, cell.seed, cell.source_id, cell.source_class)
    return [generate_from_noise(noise, t, ctx.den, ctx.sched, gen, label=BASELINE_LABEL) for t in ctx.config.targets]


# Step-count study


@dataclass
class _StepCell:
    by_step: Dict[int, List[GenerationRecord]]
    baseline: List[GenerationRecord]
    objectives: Dict[int, Optional[float]]


def run_step_study(ctx: StudyContext) -> StudyResult:
    """One inversion per cell; every snapshot step generates against the same baseline"""
    cfg = ctx.config
    steps = sorted(set(cfg.ig_snapshot_steps) | {cfg.ig_k})

    def cell_fn(cell: StudyCell) -> _StepCell:
        gen = _generation_config(ctx, cell)
        x_star = ctx.source_image(cell)
        g_star = target_gradient(ctx.clf, x_star, cell.source_class)
        snapshots = {s.step: s for s in invert_gradients(ctx.clf, g_star, cell.source_class, gen.ig)}
        by_step, objectives = {}, {}
        for step in steps:
            snap = snapshots[step]
            noise = saliency_noise_from_snapshot(snap, cell.source_id, cell.source_class, cell.seed)
            by_step[step] = [
                generate_from_noise(noise, t, ctx.den, ctx.sched, gen, label=f"k={step}") for t in cfg.targets
            ]
            objectives[step] = snap.objective
        return _StepCell(by_step, baseline_records(ctx, cell, gen), objectives)

    cells = build_cells(cfg, ctx.data)
    results = map_cells(cell_fn, cells, cfg.workers, cfg.precision)
    baseline = [r for res in results for r in res.baseline]
    out = StudyResult("study-steps")
    for step in steps:
        records = [r for res in results for r in res.by_step[step]]
        out.reports.append(evaluate_localization(records, baseline, cfg.mask_percentile, label=f"k={step}"))
        out.records.extend(records)
    out.records.extend(baseline)
    for cell, res in zip(cells, results):
        for step in steps:
            out.extras.append({
                "label": f"k={step}",
                "source_id": cell.source_id,
                "seed": cell.seed,
                "objective": res.objectives[step],
            })
    return out


# Manipulation study


def manipulated_noise(noise: SaliencyNoise, names: Sequence[str]) -> SaliencyNoise:
    """Same provenance and statistics, spatially transformed values"""
    return replace(noise, values=apply_manipulations(noise.values, names))


def centroid_agreement(plain: GenerationRecord, manipulated: GenerationRecord, names: Sequence[str]) -> Dict[str, Any]:
    """Does the manipulated run's object sit where the manipulation sends the plain run's object?

    A single hflip compares columns only; otherwise full (row, col) distance.
    """
    shape = plain.output.shape
    plain_c = plain.metrics.output_centroid
    manip_c = manipulated.metrics.output_centroid
    predicted = manipulate_points(plain_c, names, shape)
    if list(names) == ["hflip"]:
        to_predicted = abs(manip_c[1] - predicted[1])
        to_plain = abs(manip_c[1] - plain_c[1])
    else:
        to_predicted = math.dist(manip_c, predicted)
        to_plain = math.dist(manip_c, plain_c)
    valid = not (plain.metrics.blank or manipulated.metrics.blank)
    return {
        "plain_row": plain_c[0],
        "plain_col": plain_c[1],
        "manipulated_row": manip_c[0],
        "manipulated_col": manip_c[1],
        "predicted_row": predicted[0],
        "predicted_col": predicted[1],
        "agrees": bool(valid and to_predicted < to_plain),
        "blank": not valid,
    }


def manipulation_pair(noise: SaliencyNoise, names: Sequence[str], target: int, den: EpsilonPredictor,
                      sched: NoiseSchedule, gen: GenerationConfig) -> Tuple[GenerationRecord, GenerationRecord]:
    """Generate from the noise and from its manipulation with everything else fixed"""
    label = "manip=" + "+".join(names) if names else "manip=none"
    plain = generate_from_noise(noise, target, den, sched, gen, label="plain")
    manipulated = generate_from_noise(manipulated_noise(noise, names), target, den, sched, gen, label=label,
                                      manipulations=names)
    return plain, manipulated


def run_manipulation_study(ctx: StudyContext, manipulations: Optional[Sequence[str]] = None) -> StudyResult:
    """Per manipulation: paired report (manipulated vs plain) plus per-cell centroid agreement rows"""
    cfg = ctx.config
    names = list(manipulations if manipulations is not None else cfg.manipulations)
    if not names:
        raise ContractViolation("manipulation study needs at least one manipulation")

    def cell_fn(cell: StudyCell):
        gen = _generation_config(ctx, cell)
        ig = gen.ig.model_copy(update={"snapshot_steps": []})
        noise = object_saliency_noise(ctx.clf, ctx.source_image(cell), cell.source_class, ig, cell.source_id)
        pairs = {}
        for name in names:
            pairs[name] = [manipulation_pair(noise, [name], t, ctx.den, ctx.sched, gen) for t in cfg.targets]
        return pairs

    cells = build_cells(cfg, ctx.data)
    results = map_cells(cell_fn, cells, cfg.workers, cfg.precision)
    out = StudyResult("study-manip")
    for name in names:
        plain = [p for res in results for p, _ in res[name]]
        manipulated = [m for res in results for _, m in res[name]]
        out.reports.append(evaluate_localization(manipulated, plain, cfg.mask_percentile, label=f"manip={name}"))
        out.records.extend(manipulated)
        if name == names[0]:
            out.records.extend(plain)
        for cell, res in zip(cells, results):
            for p, m in res[name]:
                row = {"label": f"manip={name}", "source_id": cell.source_id, "seed": cell.seed,
                       "target_class": p.target_class}
                row.update(centroid_agreement(p, m, [name]))
                out.extras.append(row)
    return out


def agreement_rate(extras: Sequence[Dict[str, Any]], label: str) -> float:
    rows = [r for r in extras if r.get("label") == label and "agrees" in r]
    if not rows:
        return math.nan
    return sum(r["agrees"] for r in rows) / len(rows)


# Alternative saliency maps


def altmap_variants(cfg: StudyConfig) -> List[bool]:
    return {"both": [False, True], "raw": [False], "standardized": [True]}[cfg.standardize_altmaps]


def altmap_noises(ctx: StudyContext, cell: StudyCell, gen: GenerationConfig) -> Tuple[List[SaliencyNoise], List[str]]:
    """Noise per alternative method for one cell; maps that cannot be standardized are skipped"""
    cfg = ctx.config
    x_star = ctx.source_image(cell)
    y = cell.source_class
    ig = gen.ig.model_copy(update={"snapshot_steps": []})
    noises = [object_saliency_noise(ctx.clf, x_star, y, ig, cell.source_id)]
    skipped = []
    maps = [
        (NoiseMethod.FGSM, fgsm_map(ctx.clf, x_star, y, cfg.fgsm_epsilon)),
        (NoiseMethod.FEATURE_MAP, feature_map_saliency(ctx.clf, x_star, cfg.feature_layer)),
    ]
    for method, values in maps:
        for standardized in altmap_variants(cfg):
            try:
                noises.append(make_saliency_noise(values, method, 0, cell.source_id, y, cell.seed, standardized))
            except ContractViolation as e:
                tag = f"{method.value}/{'std' if standardized else 'raw'}"
                logger.warning(f"skipping {tag} for {cell.source_id} seed={cell.seed}: {e}")
                skipped.append(tag)
    return noises, skipped


def run_altmaps_study(ctx: StudyContext) -> StudyResult:
    """Inverting gradients, FGSM and feature-map noise through the same evaluation"""
    cfg = ctx.config

    def cell_fn(cell: StudyCell):
        gen = _generation_config(ctx, cell)
        noises, skipped = altmap_noises(ctx, cell, gen)
        by_method = {
            noise.tag: [generate_from_noise(noise, t, ctx.den, ctx.sched, gen, label=noise.tag) for t in cfg.targets]
            for noise in noises
        }
        return by_method, baseline_records(ctx, cell, gen), skipped

    cells = build_cells(cfg, ctx.data)
    results = map_cells(cell_fn, cells, cfg.workers, cfg.precision)
    tags = [f"{NoiseMethod.INVERTING_GRADIENTS.value}/std"]
    for method in (NoiseMethod.FGSM, NoiseMethod.FEATURE_MAP):
        for standardized in altmap_variants(cfg):
            tags.append(f"{method.value}/{'std' if standardized else 'raw'}")

    out = StudyResult("study-altmaps")
    for tag in tags:
        records, baseline = [], []
        for by_method, base, _ in results:
            if tag in by_method:
                records.extend(by_method[tag])
                baseline.extend(base)
        if not records:
            logger.warning(f"no cell produced {tag} noise; omitted from the report")
            continue
        out.reports.append(evaluate_localization(records, baseline, cfg.mask_percentile, label=tag))
        out.records.extend(records)
    out.records.extend(r for _, base, _ in results for r in base)
    for cell, (_, _, skipped) in zip(cells, results):
        for tag in skipped:
            out.extras.append({"label": tag, "source_id": cell.source_id, "seed": cell.seed, "skipped": True})
    return out
