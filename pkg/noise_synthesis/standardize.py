from typing import Tuple

import numpy as np

from errors import ContractViolation
from noise_synthesis.models import NoiseMethod, SaliencyNoise


def standardize(x) -> Tuple[np.ndarray, float, float]:
    """Per-image (x - mu) / sigma with the population standard deviation"""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise ContractViolation("standardize needs at least two elements")
    if not np.all(np.isfinite(x)):
        raise ContractViolation("standardize needs finite values")
    mu = float(x.mean())
    sigma = float(x.std())
    if sigma == 0.0:
        raise ContractViolation("cannot standardize a constant image (zero variance)")
    return (x - mu) / sigma, mu, sigma


def make_saliency_noise(values, method: NoiseMethod, steps_k: int = 0, source_id: str = "",
                        source_class: int = -1, seed: int = 0, standardized: bool = True) -> SaliencyNoise:
    values = np.asarray(values, dtype=np.float64)
    if standardized:
        values, mu, sigma = standardize(values)
    else:
        if not np.all(np.isfinite(values)):
            raise ContractViolation("saliency noise values must be finite")
        mu, sigma = 0.0, 1.0
    return SaliencyNoise(
        values=values,
        method=method,
        steps_k=steps_k,
        source_id=source_id,
        source_class=source_class,
        mu=mu,
        sigma=sigma,
        seed=seed,
        standardized=standardized,
    )


def gaussian_baseline(shape: Tuple[int, ...], seed: int, source_id: str = "", source_class: int = -1) -> SaliencyNoise:
    """Standardized seeded Gaussian, the plain diffusion starting noise"""
    rng = np.random.default_rng(seed)
    return make_saliency_noise(rng.standard_normal(shape), NoiseMethod.GAUSSIAN_BASELINE,
                               source_id=source_id, source_class=source_class, seed=seed)
