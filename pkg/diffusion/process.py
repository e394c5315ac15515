import numpy as np

from diffusion.schedule import NoiseSchedule
from errors import ContractViolation, ShapeMismatch


def _same_shape(op: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(op, a.shape, b.shape)


def forward_noise_step(x_prev, t: int, z, sched: NoiseSchedule) -> np.ndarray:
    """x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) z"""
    beta = sched.beta(t)
    x_prev, z = np.asarray(x_prev, dtype=np.float64), np.asarray(z, dtype=np.float64)
    _same_shape("forward_noise_step", x_prev, z)
    return np.sqrt(1.0 - beta) * x_prev + np.sqrt(beta) * z


def forward_noise(x_0, t, eps, sched: NoiseSchedule) -> np.ndarray:
    """Closed-form marginal sample x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps.

    The square root on the noise coefficient follows from the marginal
    variance (1 - abar_t) I. ``t`` may be one step or one step per leading
    batch entry; ``x_0`` broadcasts against ``eps``.
    """
    x_0, eps = np.asarray(x_0, dtype=np.float64), np.asarray(eps, dtype=np.float64)
    try:
        np.broadcast_shapes(x_0.shape, eps.shape)
    except ValueError:
        raise ShapeMismatch("forward_noise", x_0.shape, eps.shape) from None
    t = np.asarray(t, dtype=np.int64)
    if np.any(t < 1) or np.any(t > sched.T):
        raise ContractViolation(f"timestep out of [1, {sched.T}]: {t.tolist()}")
    alpha_bar = sched.alpha_bars[t - 1]
    if t.ndim:
        alpha_bar = alpha_bar.reshape(t.shape + (1,) * (eps.ndim - t.ndim))
    return np.sqrt(alpha_bar) * x_0 + np.sqrt(1.0 - alpha_bar) * eps


def reverse_step(x_t, t: int, eps_hat, z, sched: NoiseSchedule) -> np.ndarray:
    """x_{t-1} = (x_t - (1 - alpha_t) / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t) + sigma_t z"""
    t = sched.check_step(t)
    x_t, eps_hat, z = (np.asarray(a, dtype=np.float64) for a in (x_t, eps_hat, z))
    _same_shape("reverse_step", x_t, eps_hat)
    _same_shape("reverse_step", x_t, z)
    if t == 1 and np.any(z != 0):
        raise ContractViolation("the final reverse step (t = 1) adds no noise; z must be zero")
    alpha, alpha_bar, sigma = sched.alpha(t), sched.alpha_bar(t), sched.sigma(t)
    mean = (x_t - (1.0 - alpha) / np.sqrt(1.0 - alpha_bar) * eps_hat) / np.sqrt(alpha)
    return mean + sigma * z
