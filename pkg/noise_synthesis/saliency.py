import logging
from typing import List, Tuple

import numpy as np

from autodiff import Tensor, no_record
from errors import ContractViolation, ShapeMismatch
from nets.base import Model, input_gradient
from nets.classifier import Classifier

logger = logging.getLogger(__name__)

DEFAULT_MASK_PERCENTILE = 80.0


def fgsm_map(model: Model, x, y: int, epsilon: float) -> np.ndarray:
    """epsilon * sign(dL/dx), with sign(0) = 0"""
    if not epsilon > 0:
        raise ContractViolation(f"FGSM magnitude must be positive, got {epsilon}")
    grad = input_gradient(model, np.asarray(x, dtype=np.float64), y)
    return epsilon * np.sign(grad)


def channel_average_saliency(activation, out_shape: Tuple[int, int]) -> np.ndarray:
    """Mean of |activation| over channels, nearest-neighbour upsampled to ``out_shape``.

    ``activation`` is (C, h, w) or (1, C, h, w).
    """
    a = np.asarray(activation, dtype=np.float64)
    if a.ndim == 4 and a.shape[0] == 1:
        a = a[0]
    if a.ndim != 3:
        raise ShapeMismatch("channel_average_saliency", a.shape, ("C", "h", "w"))
    averaged = np.abs(a).mean(axis=0)
    h, w = averaged.shape
    out_h, out_w = out_shape
    rows = (np.arange(out_h) * h) // out_h
    cols = (np.arange(out_w) * w) // out_w
    return averaged[np.ix_(rows, cols)]


def feature_map_saliency(clf: Classifier, x, layer: int) -> np.ndarray:
    """Channel-averaged absolute activation of conv layer ``layer`` at input resolution"""
    if not 0 <= layer < clf.num_conv_layers:
        raise ContractViolation(f"feature layer {layer} out of range [0, {clf.num_conv_layers})")
    x = np.asarray(x, dtype=clf.parameters["head.weight"].dtype)
    captured: List[Tensor] = []
    with no_record():
        clf.forward(Tensor(x), capture=captured)
    return channel_average_saliency(captured[layer].data, clf.input_shape)


def saliency_mask(values, percentile: float = DEFAULT_MASK_PERCENTILE) -> np.ndarray:
    """Boolean mask of |values| at or above the nearest-rank percentile.

    The threshold is the (floor(p * N / 100) + 1)-th smallest magnitude,
    capped at N; every value tying the threshold is kept.
    """
    if not np.isfinite(percentile) or not 0 < percentile < 100:
        raise ContractViolation(f"mask percentile must lie strictly inside (0, 100), got {percentile}")
    magnitude = np.abs(np.asarray(values, dtype=np.float64))
    if not np.all(np.isfinite(magnitude)):
        raise ContractViolation("saliency map must be finite")
    n = magnitude.size
    if n == 0:
        raise ContractViolation("saliency map is empty")
    rank = min(int(np.floor(percentile * n / 100.0)) + 1, n)
    threshold = np.partition(magnitude.ravel(), rank - 1)[rank - 1]
    return magnitude >= threshold
