import logging
from typing import Optional

import numpy as np

from autodiff import ComputationRecord, Tensor, gradient
from autodiff import ops
from diffusion.process import forward_noise
from diffusion.schedule import NoiseSchedule
from errors import ShapeMismatch
from nets.denoiser import Denoiser, DenoiserArch, build_denoiser
from nets.optim import make_optimizer
from nets.training import LabeledImages, TrainConfig, check_dataset, iterate_batches

logger = logging.getLogger(__name__)


def epsilon_loss(den: Denoiser, x_0: np.ndarray, labels: np.ndarray, t: np.ndarray, eps: np.ndarray,
                 sched: NoiseSchedule, params=None) -> Tensor:
    """Mean squared error between the injected noise and the prediction at x_t"""
    x_t = forward_noise(x_0, t, eps, sched).astype(den.dtype)
    pred = den.forward(Tensor(x_t), t, labels, params)
    diff = ops.sub(pred, Tensor(eps.astype(den.dtype)))
    return ops.mean(ops.mul(diff, diff))


def train_denoiser(data: LabeledImages, sched: NoiseSchedule, cfg: TrainConfig,
                   arch: Optional[DenoiserArch] = None) -> Denoiser:
    """epsilon-objective training with t uniform on [1, T]; per-epoch mean MSE in ``den.summary``"""
    if arch is None:
        arch = DenoiserArch(num_timesteps=sched.T, num_classes=max(1, int(data.labels.max()) + 1))
    if arch.num_timesteps != sched.T:
        raise ShapeMismatch("denoiser timesteps", (arch.num_timesteps,), (sched.T,))
    check_dataset(data, arch.num_classes)
    if data.images.ndim != 3:
        raise ShapeMismatch("denoiser training images", data.images.shape, ("N", "H", "W"))
    rng = np.random.default_rng(cfg.seed)
    den = build_denoiser(arch, cfg.seed)
    params = den.parameters
    optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate)
    epoch_losses = []

    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for batch in iterate_batches(data, cfg.batch_size, rng):
            n = len(batch)
            t = rng.integers(1, sched.T + 1, size=n)
            eps = rng.standard_normal(batch.images.shape)
            record = ComputationRecord()
            bound = params.bind(record)
            loss = epsilon_loss(den, batch.images, batch.labels, t, eps, sched, bound)
            grads = gradient(loss, list(bound.values()))
            optimizer.step(params, {name: g.data for name, g in zip(bound, grads)})
            total += float(loss.data) * n
            count += n
        epoch_losses.append(total / count)
        logger.info(f"denoiser epoch {epoch + 1}/{cfg.epochs}: eps-MSE={epoch_losses[-1]:.5f}")

    den.summary = {"epoch_losses": epoch_losses}
    return den


def evaluate_epsilon_mse(den: Denoiser, data: LabeledImages, sched: NoiseSchedule, seed: int = 0) -> float:
    """Mean eps-MSE over the dataset at seeded random timesteps"""
    rng = np.random.default_rng(seed)
    t = rng.integers(1, sched.T + 1, size=len(data))
    eps = rng.standard_normal(data.images.shape)
    return float(epsilon_loss(den, data.images, data.labels, t, eps, sched).data)
