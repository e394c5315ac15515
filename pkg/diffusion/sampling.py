import logging
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np

from diffusion.process import reverse_step
from diffusion.schedule import NoiseSchedule
from errors import ContractViolation, ShapeMismatch

logger = logging.getLogger(__name__)


class EpsilonPredictor(Protocol):
    def predict(self, x_t: np.ndarray, t: int, c: int) -> np.ndarray:
        ...


@dataclass
class Trajectory:
    """(t, x_t) snapshots from T down to 0"""

    steps: List[Tuple[int, np.ndarray]] = field(default_factory=list)
    seed: int = 0
    class_id: int = 0
    noise_source: str = "gaussian"

    @property
    def final(self) -> np.ndarray:
        return self.steps[-1][1]

    @property
    def timesteps(self) -> List[int]:
        return [t for t, _ in self.steps]

    def at(self, t: int) -> np.ndarray:
        for step, image in self.steps:
            if step == t:
                return image
        raise ContractViolation(f"timestep {t} was not recorded in this trajectory")


def sample_loop(den: EpsilonPredictor, sched: NoiseSchedule, c: int, x_T: Optional[np.ndarray] = None,
                seed: int = 0, image_shape: Optional[Tuple[int, int]] = None,
                snapshot_steps: Optional[Sequence[int]] = None, stochastic: bool = True,
                noise_source: str = "gaussian") -> Trajectory:
    """Ancestral sampling from x_T down to x_0.

    ``x_T`` defaults to a unit Gaussian drawn from ``seed``; the per-step
    z are drawn from the same generator afterwards, so runs are
    deterministic given (seed, x_T, den, c). ``snapshot_steps`` selects
    which x_t to keep (T and 0 are always kept; None keeps all).
    ``stochastic=False`` forces every z to zero.
    """
    rng = np.random.default_rng(seed)
    if x_T is None:
        if image_shape is None:
            raise ContractViolation("sample_loop needs x_T or image_shape")
        x_T = rng.standard_normal(image_shape)
    else:
        x_T = np.asarray(x_T, dtype=np.float64)
        if image_shape is not None and x_T.shape != tuple(image_shape):
            raise ShapeMismatch("sample_loop x_T", x_T.shape, image_shape)

    keep = None if snapshot_steps is None else set(snapshot_steps) | {sched.T, 0}
    traj = Trajectory(seed=seed, class_id=c, noise_source=noise_source)
    x = x_T.copy()
    traj.steps.append((sched.T, x.copy()))
    for t in range(sched.T, 0, -1):
        eps_hat = np.asarray(den.predict(x, t, c), dtype=np.float64)
        if stochastic and t > 1:
            z = rng.standard_normal(x.shape)
        else:
            z = np.zeros_like(x)
        x = reverse_step(x, t, eps_hat, z, sched)
        if keep is None or (t - 1) in keep:
            traj.steps.append((t - 1, x.copy()))
    return traj
