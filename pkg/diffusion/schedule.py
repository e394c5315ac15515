from dataclasses import dataclass

import numpy as np

from errors import ContractViolation


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step constants, stored 0-based: index t-1 holds step t"""

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    sigmas: np.ndarray

    @property
    def T(self) -> int:
        return int(self.betas.shape[0])

    def check_step(self, t: int) -> int:
        if not 1 <= int(t) <= self.T:
            raise ContractViolation(f"timestep {t} out of [1, {self.T}]")
        return int(t)

    def beta(self, t: int) -> float:
        return float(self.betas[self.check_step(t) - 1])

    def alpha(self, t: int) -> float:
        return float(self.alphas[self.check_step(t) - 1])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[self.check_step(t) - 1])

    def sigma(self, t: int) -> float:
        return float(self.sigmas[self.check_step(t) - 1])


def make_schedule(T: int = 200, kind: str = "linear", beta_min: float = 1e-4, beta_max: float = 0.02) -> NoiseSchedule:
    """Linear beta schedule inclusive of both endpoints; sigma_t = sqrt(beta_t)"""
    if T < 1:
        raise ContractViolation(f"schedule needs T >= 1, got {T}")
    if not 0 < beta_min <= beta_max < 1:
        raise ContractViolation(f"schedule needs 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")
    if kind != "linear":
        raise ContractViolation(f"unknown schedule kind {kind!r}")
    betas = np.linspace(beta_min, beta_max, T, dtype=np.float64)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    sigmas = np.sqrt(betas)
    for arr in (betas, alphas, alpha_bars, sigmas):
        arr.setflags(write=False)
    return NoiseSchedule(betas, alphas, alpha_bars, sigmas)
