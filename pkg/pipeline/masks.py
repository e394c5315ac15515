from typing import Tuple

import numpy as np
from scipy import ndimage

from errors import ContractViolation, ShapeMismatch

BLANK_RANGE = 1e-6


def object_mask_of_output(x_0) -> Tuple[np.ndarray, bool]:
    """Largest bright connected component of an image.

    Pixels at or above the midpoint of the image's min and max form the
    foreground (4-connected); the largest component is kept, ties going to
    the first one in raster order. Returns ``(mask, blank)`` where blank
    images (max - min < 1e-6) give an empty mask.
    """
    x = np.asarray(x_0, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch("object_mask_of_output", x.shape, ("H", "W"))
    if not np.all(np.isfinite(x)):
        raise ContractViolation("object_mask_of_output needs a finite image")
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < BLANK_RANGE:
        return np.zeros(x.shape, dtype=bool), True
    labels, count = ndimage.label(x >= (lo + hi) / 2.0)
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    sizes[0] = 0
    return labels == int(np.argmax(sizes)), False


def iou(a, b) -> float:
    """|a & b| / |a | b|, 0.0 when both masks are empty"""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeMismatch("iou", a.shape, b.shape)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def mask_centroid(mask) -> Tuple[float, float]:
    """Mean (row, col) of the set pixels; NaNs for an empty mask"""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ShapeMismatch("mask_centroid", mask.shape, ("H", "W"))
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return float("nan"), float("nan")
    return float(rows.mean()), float(cols.mean())


def centroid_offset(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))
