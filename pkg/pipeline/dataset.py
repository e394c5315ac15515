"""
Synthetic bright-on-dark shapes: one disk or square per 24x24 frame.

Images live in [0, 1] with a black background. The classifier consumes
them as they are; the diffusion model works in [-1, 1] (``to_model_range``
/ ``to_image_range`` convert between the two).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from errors import ContractViolation
from nets.training import LabeledImages
from pipeline.masks import mask_centroid

logger = logging.getLogger(__name__)

SHAPE_CLASSES = ("disk", "square")


class DatasetSpec(BaseModel):
    """Generator settings.

    ``region`` is (top, left, bottom, right) with exclusive bottom/right; an
    object's bounding box always lies inside it. ``None`` means the frame.
    """

    image_size: int = Field(24, ge=4)
    classes: Tuple[str, ...] = SHAPE_CLASSES
    object_size_min: int = Field(6, ge=2)
    object_size_max: int = Field(10, ge=2)
    region: Optional[Tuple[int, int, int, int]] = None
    intensity_min: float = Field(0.6, gt=0.0, le=1.0)
    intensity_max: float = Field(1.0, gt=0.0, le=1.0)
    count: int = Field(200, ge=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def check_ranges(self) -> "DatasetSpec":
        unknown = [c for c in self.classes if c not in SHAPE_CLASSES]
        if unknown or not self.classes:
            raise ValueError(f"classes must be drawn from {SHAPE_CLASSES}, got {self.classes}")
        if self.object_size_min > self.object_size_max:
            raise ValueError("object_size_min exceeds object_size_max")
        if self.intensity_min > self.intensity_max:
            raise ValueError("intensity_min exceeds intensity_max")
        return self

    @property
    def placement(self) -> Tuple[int, int, int, int]:
        return self.region if self.region is not None else (0, 0, self.image_size, self.image_size)


@dataclass
class ShapesDataset:
    images: np.ndarray  # (N, S, S) in [0, 1]
    labels: np.ndarray  # (N,)
    masks: np.ndarray  # (N, S, S) bool
    centroids: np.ndarray  # (N, 2) (row, col)
    spec: DatasetSpec

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def source_id(self, index: int) -> str:
        return f"shape-{self.spec.seed}-{index:05d}"

    @property
    def source_ids(self) -> List[str]:
        return [self.source_id(i) for i in range(len(self))]

    def labeled(self) -> LabeledImages:
        return LabeledImages(self.images, self.labels)

    def labeled_model_range(self) -> LabeledImages:
        return LabeledImages(to_model_range(self.images), self.labels)


def to_model_range(images) -> np.ndarray:
    return 2.0 * np.asarray(images, dtype=np.float64) - 1.0


def to_image_range(x) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) + 1.0) / 2.0


def render_shape(kind: str, size: int, top: int, left: int, image_size: int) -> np.ndarray:
    """Boolean mask of a disk inscribed in, or a square filling, the size x size box at (top, left)"""
    mask = np.zeros((image_size, image_size), dtype=bool)
    if kind == "square":
        mask[top:top + size, left:left + size] = True
        return mask
    rows, cols = np.mgrid[0:size, 0:size] + 0.5
    radius = size / 2.0
    disk = (rows - radius) ** 2 + (cols - radius) ** 2 <= radius ** 2
    mask[top:top + size, left:left + size] = disk
    return mask


def make_shapes_dataset(spec: DatasetSpec) -> ShapesDataset:
    """Seed-deterministic shapes; labels are balanced exactly up to count % classes"""
    top, left, bottom, right = spec.placement
    s = spec.image_size
    if not (0 <= top < bottom <= s and 0 <= left < right <= s):
        raise ContractViolation(f"placement region {spec.placement} is not inside the {s}x{s} frame")
    if spec.object_size_max > min(bottom - top, right - left):
        raise ContractViolation(
            f"objects up to {spec.object_size_max} px do not fit the {bottom - top}x{right - left} placement region"
        )

    rng = np.random.default_rng(spec.seed)
    k = len(spec.classes)
    labels = rng.permutation(np.arange(spec.count) % k).astype(np.int64)
    images = np.zeros((spec.count, s, s), dtype=np.float64)
    masks = np.zeros((spec.count, s, s), dtype=bool)
    centroids = np.zeros((spec.count, 2), dtype=np.float64)

    for i, label in enumerate(labels):
        size = int(rng.integers(spec.object_size_min, spec.object_size_max + 1))
        r0 = int(rng.integers(top, bottom - size + 1))
        c0 = int(rng.integers(left, right - size + 1))
        intensity = float(rng.uniform(spec.intensity_min, spec.intensity_max))
        mask = render_shape(spec.classes[label], size, r0, c0, s)
        masks[i] = mask
        images[i][mask] = intensity
        centroids[i] = mask_centroid(mask)

    logger.info(f"Generated {spec.count} shape images ({s}x{s}, classes={list(spec.classes)}, seed={spec.seed})")
    return ShapesDataset(images=images, labels=labels, masks=masks, centroids=centroids, spec=spec)


def select_sources(data: ShapesDataset, count: int, seed: int) -> List[int]:
    """``count`` source indices, cycling classes so each is represented"""
    if count < 1:
        raise ContractViolation(f"need at least one source image, got {count}")
    rng = np.random.default_rng(seed)
    by_class = [list(rng.permutation(np.flatnonzero(data.labels == c))) for c in range(len(data.spec.classes))]
    chosen: List[int] = []
    while len(chosen) < count:
        progressed = False
        for pool in by_class:
            if pool and len(chosen) < count:
                chosen.append(int(pool.pop(0)))
                progressed = True
        if not progressed:
            break
    return chosen
