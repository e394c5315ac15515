"""
Generation from Object Saliency Noise:

    g*  = dL(x*, y)/dtheta
    x   = iterate k of the gradient inversion toward g*
    x'  = (x - mean) / std
    out = reverse diffusion from x_T = x' for each target class

Every target class receives the same standardized noise; the sampling
seed only drives the per-step z.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from diffusion.sampling import EpsilonPredictor, Trajectory, sample_loop
from diffusion.schedule import NoiseSchedule
from errors import ContractViolation, ShapeMismatch
from nets.base import Model, param_gradient
from noise_synthesis.inversion import invert_gradients
from noise_synthesis.models import IGConfig, InversionSnapshot, NoiseMethod, SaliencyNoise
from noise_synthesis.saliency import DEFAULT_MASK_PERCENTILE, saliency_mask
from noise_synthesis.standardize import make_saliency_noise
from pipeline.masks import centroid_offset, iou, mask_centroid, object_mask_of_output
from pipeline.pgm import encode_pgm

logger = logging.getLogger(__name__)


class GenerationConfig(BaseModel):
    ig: IGConfig = Field(default_factory=IGConfig)
    sample_seed: int = Field(0, ge=0)
    mask_percentile: float = Field(DEFAULT_MASK_PERCENTILE, gt=0, lt=100)
    stochastic: bool = True
    keep_trajectory: bool = False
    trajectory_stride: int = Field(0, ge=0)


@dataclass
class LocalizationMetrics:
    object_mask: np.ndarray
    blank: bool
    saliency_iou: float
    centroid_offset: float
    output_centroid: Tuple[float, float]
    noise_centroid: Tuple[float, float]


@dataclass
class GenerationRecord:
    source_id: str
    source_class: int
    target_class: int
    noise: SaliencyNoise
    output: np.ndarray
    metrics: LocalizationMetrics
    sample_seed: int = 0
    mask_percentile: float = DEFAULT_MASK_PERCENTILE
    trajectory: Optional[Trajectory] = None
    label: str = ""
    manipulations: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def method(self) -> str:
        return self.noise.tag

    def recompute_metrics(self) -> LocalizationMetrics:
        return localization_metrics(self.noise.values, self.output, self.mask_percentile)


def localization_metrics(noise_values, output, percentile: float = DEFAULT_MASK_PERCENTILE) -> LocalizationMetrics:
    """IoU and centroid distance between the noise's saliency mask and the output's object mask"""
    noise_values = np.asarray(noise_values)
    output = np.asarray(output)
    if noise_values.shape != output.shape:
        raise ShapeMismatch("localization metrics", noise_values.shape, output.shape)
    salient = saliency_mask(noise_values, percentile)
    obj, blank = object_mask_of_output(output)
    noise_c = mask_centroid(salient)
    out_c = mask_centroid(obj)
    return LocalizationMetrics(
        object_mask=obj,
        blank=blank,
        saliency_iou=iou(salient, obj),
        centroid_offset=centroid_offset(noise_c, out_c),
        output_centroid=out_c,
        noise_centroid=noise_c,
    )


def _snapshot_steps(cfg: GenerationConfig, T: int) -> Optional[List[int]]:
    if not cfg.keep_trajectory:
        return []
    if cfg.trajectory_stride:
        return list(range(0, T + 1, cfg.trajectory_stride))
    return None


def generate_from_noise(noise: SaliencyNoise, target: int, den: EpsilonPredictor, sched: NoiseSchedule,
                        cfg: GenerationConfig, label: str = "",
                        manipulations: Sequence[str] = ()) -> GenerationRecord:
    """Reverse diffusion from x_T = noise.values for one target class"""
    traj = sample_loop(den, sched, target, x_T=noise.values, seed=cfg.sample_seed,
                       snapshot_steps=_snapshot_steps(cfg, sched.T), stochastic=cfg.stochastic,
                       noise_source=noise.tag)
    output = traj.final
    return GenerationRecord(
        source_id=noise.source_id,
        source_class=noise.source_class,
        target_class=int(target),
        noise=noise,
        output=output,
        metrics=localization_metrics(noise.values, output, cfg.mask_percentile),
        sample_seed=cfg.sample_seed,
        mask_percentile=cfg.mask_percentile,
        trajectory=traj if cfg.keep_trajectory else None,
        label=label,
        manipulations=tuple(manipulations),
    )


def target_gradient(clf: Model, x_star, y: int) -> np.ndarray:
    return param_gradient(clf, np.asarray(x_star), y).data


def saliency_noise_from_snapshot(snapshot: InversionSnapshot, source_id: str, y: int, seed: int) -> SaliencyNoise:
    return make_saliency_noise(snapshot.image, NoiseMethod.INVERTING_GRADIENTS, steps_k=snapshot.step,
                               source_id=source_id, source_class=y, seed=seed)


def object_saliency_noise(clf: Model, x_star, y: int, ig: IGConfig, source_id: str = "") -> SaliencyNoise:
    """Standardized inverting-gradients iterate k for the source image"""
    snapshots = invert_gradients(clf, target_gradient(clf, x_star, y), y, ig)
    return saliency_noise_from_snapshot(snapshots[-1], source_id, y, ig.init_seed)


def generate_conditioned(x_star, y: int, k: int, targets: Sequence[int], clf: Model, den: EpsilonPredictor,
                         sched: NoiseSchedule, cfg: GenerationConfig, source_id: str = "") -> List[GenerationRecord]:
    """One record per target class, all sampled from the same standardized noise"""
    if k < 0:
        raise ContractViolation(f"inversion step count must be non-negative, got {k}")
    if not targets:
        raise ContractViolation("generate_conditioned needs at least one target class")
    ig = cfg.ig.model_copy(update={"k": k, "snapshot_steps": []})
    noise = object_saliency_noise(clf, x_star, y, ig, source_id)
    logger.info(f"Generating {len(targets)} target(s) for {source_id or 'source'} (k={k}, seed={ig.init_seed})")
    return [generate_from_noise(noise, t, den, sched, cfg, label=f"k={k}") for t in targets]


def export_trajectory(traj: Trajectory, directory, prefix: str = "x") -> List[Path]:
    """Each recorded x_t as ``<prefix>_t<t>.pgm``, largest t first"""
    directory = Path(directory)
    width = len(str(max(traj.timesteps)))
    return [encode_pgm(image, directory / f"{prefix}_t{t:0{width}d}.pgm") for t, image in traj.steps]
