from dataclasses import dataclass
from enum import Enum
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class NoiseMethod(str, Enum):
    INVERTING_GRADIENTS = "inverting-gradients"
    FGSM = "fgsm"
    FEATURE_MAP = "feature-map"
    GAUSSIAN_BASELINE = "gaussian-baseline"


@dataclass
class SaliencyNoise:
    """Image-shaped noise plus where it came from.

    ``values`` is what the sampler receives; ``values * sigma + mu``
    reproduces the raw map. Raw (unstandardized) variants carry mu=0, sigma=1.
    """

    values: np.ndarray
    method: NoiseMethod
    steps_k: int = 0
    source_id: str = ""
    source_class: int = -1
    mu: float = 0.0
    sigma: float = 1.0
    seed: int = 0
    standardized: bool = True

    @property
    def raw(self) -> np.ndarray:
        return self.values * self.sigma + self.mu

    @property
    def tag(self) -> str:
        variant = "std" if self.standardized else "raw"
        return f"{self.method.value}/{variant}"


class IGConfig(BaseModel):
    """Inverting-gradients run: k optimizer steps from a seeded Gaussian.

    The defaults optimize the plain cosine objective. ``total_variation``,
    ``signed``, ``boxed`` and ``lr_decay`` switch on the regularizer, the
    sign-of-gradient step, clipping to [-box_bound, box_bound] and the
    x0.1 decay at 3/8, 5/8 and 7/8 of k.
    """

    k: int = Field(5000, ge=0)
    learning_rate: float = Field(0.1, gt=0)
    optimizer: Literal["sgd", "adam"] = "adam"
    snapshot_steps: List[int] = Field(default_factory=list)
    init_seed: int = 0
    image_shape: Tuple[int, ...] = (24, 24)
    total_variation: float = Field(0.0, ge=0)
    signed: bool = False
    boxed: bool = False
    box_bound: float = Field(3.0, gt=0)
    lr_decay: bool = False
    log_every: int = Field(500, ge=0)

    @field_validator("snapshot_steps")
    @classmethod
    def unique_sorted(cls, steps: List[int]) -> List[int]:
        if len(set(steps)) != len(steps):
            raise ValueError(f"snapshot steps must be unique, got {steps}")
        return sorted(steps)

    @model_validator(mode="after")
    def steps_within_k(self) -> "IGConfig":
        if any(s < 0 or s > self.k for s in self.snapshot_steps):
            raise ValueError(f"snapshot steps must lie in [0, {self.k}], got {self.snapshot_steps}")
        return self

    def lr_at(self, step: int) -> float:
        if not self.lr_decay:
            return self.learning_rate
        milestones = [int(self.k * f) for f in (3 / 8, 5 / 8, 7 / 8)]
        return self.learning_rate * 0.1 ** sum(step >= m for m in milestones)


@dataclass
class InversionSnapshot:
    step: int
    image: np.ndarray
    objective: Optional[float] = None
