from noise_synthesis.inversion import cosine_gradient_distance, invert_gradients, inversion_objective, total_variation
from noise_synthesis.manipulations import (
    MANIPULATIONS,
    apply_manipulations,
    hflip,
    manipulate_point,
    manipulate_points,
    rotate90,
)
from noise_synthesis.models import IGConfig, InversionSnapshot, NoiseMethod, SaliencyNoise
from noise_synthesis.saliency import (
    DEFAULT_MASK_PERCENTILE,
    channel_average_saliency,
    feature_map_saliency,
    fgsm_map,
    saliency_mask,
)
from noise_synthesis.standardize import gaussian_baseline, make_saliency_noise, standardize

__all__ = [
    "DEFAULT_MASK_PERCENTILE",
    "IGConfig",
    "InversionSnapshot",
    "MANIPULATIONS",
    "NoiseMethod",
    "SaliencyNoise",
    "apply_manipulations",
    "channel_average_saliency",
    "cosine_gradient_distance",
    "feature_map_saliency",
    "fgsm_map",
    "gaussian_baseline",
    "hflip",
    "invert_gradients",
    "inversion_objective",
    "make_saliency_noise",
    "manipulate_point",
    "manipulate_points",
    "rotate90",
    "saliency_mask",
    "standardize",
    "total_variation",
]
