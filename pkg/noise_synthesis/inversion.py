"""
Inverting gradients: find an image whose parameter gradient points the
same way as a target gradient.

    objective(x) = 1 - <g(x), g*> / (|g(x)| |g*|),   g(x) = dL_theta(x, y)/dtheta

Each step differentiates the objective w.r.t. x through g(x), which is
the nested gradient ``param_gradient(..., carry_graph=True)`` provides.
"""

import logging
from typing import List

import numpy as np

from autodiff import ComputationRecord, Tensor, as_tensor, gradient
from autodiff import ops
from errors import ShapeMismatch, ZeroNormError
from nets.base import Model, param_gradient
from nets.optim import make_optimizer
from noise_synthesis.models import IGConfig, InversionSnapshot

logger = logging.getLogger(__name__)


def cosine_gradient_distance(g, g_star) -> Tensor:
    """1 - cos(g, g*); recorded when ``g`` is"""
    g = as_tensor(g)
    g_star = g_star if isinstance(g_star, Tensor) else Tensor(np.asarray(g_star, dtype=g.dtype))
    if g.ndim != 1 or g.shape != g_star.shape:
        raise ShapeMismatch("cosine_gradient_distance", g.shape, g_star.shape)
    norm_g = ops.l2_norm(g)
    norm_star = ops.l2_norm(g_star)
    if float(norm_g.data) == 0.0 or float(norm_star.data) == 0.0:
        raise ZeroNormError("cosine distance of a zero-norm gradient")
    cosine = ops.div(ops.dot(g, g_star), ops.mul(norm_g, norm_star))
    return ops.sub(1.0, cosine)


def total_variation(x) -> Tensor:
    """Anisotropic TV over the last two axes: mean |row diff| + mean |column diff|"""
    x = as_tensor(x)
    lead = ((0, 0),) * (x.ndim - 2)
    dx = ops.sub(ops.crop(x, lead + ((0, 0), (0, 1))), ops.crop(x, lead + ((0, 0), (1, 0))))
    dy = ops.sub(ops.crop(x, lead + ((0, 1), (0, 0))), ops.crop(x, lead + ((1, 0), (0, 0))))
    return ops.add(ops.mean(ops.abs(dx)), ops.mean(ops.abs(dy)))


def inversion_objective(model: Model, x, y: int, target_grad, total_variation_weight: float = 0.0) -> Tensor:
    """Cosine gradient distance at x (plus the optional TV term), recorded on x's record"""
    g = param_gradient(model, x, y, carry_graph=True)
    objective = cosine_gradient_distance(g, target_grad)
    if total_variation_weight > 0:
        objective = ops.add(objective, ops.scale(total_variation(x), total_variation_weight))
    return objective


def _objective_value(model: Model, x: np.ndarray, y: int, target: np.ndarray, cfg: IGConfig, step: int) -> float:
    try:
        g = param_gradient(model, Tensor(x), y)
        value = float(cosine_gradient_distance(g, target).data)
    except ZeroNormError as e:
        raise ZeroNormError(str(e), step=step) from None
    if cfg.total_variation > 0:
        value += cfg.total_variation * float(total_variation(Tensor(x)).data)
    return value


def invert_gradients(model: Model, target_grad, y: int, cfg: IGConfig) -> List[InversionSnapshot]:
    """Optimize a seeded Gaussian image toward ``target_grad``.

    Returns the iterates at ``cfg.snapshot_steps`` plus step ``cfg.k``; the
    snapshot at step i is the image after i optimizer updates, with the
    objective evaluated at that image.
    """
    model.check_label(y)
    target = np.asarray(target_grad.data if isinstance(target_grad, Tensor) else target_grad, dtype=np.float64)
    if target.shape != (model.parameter_count,):
        raise ShapeMismatch("invert_gradients target", target.shape, (model.parameter_count,))
    shape = tuple(model.input_shape)
    dtype = next(iter(model.parameters.items()))[1].dtype
    rng = np.random.default_rng(cfg.init_seed)
    state = {"x": rng.standard_normal(shape).astype(dtype)}
    optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate)
    wanted = set(cfg.snapshot_steps) | {cfg.k}
    snapshots: List[InversionSnapshot] = []

    for step in range(cfg.k):
        record = ComputationRecord()
        x = record.leaf(state["x"])
        try:
            objective = inversion_objective(model, x, y, target, cfg.total_variation)
        except ZeroNormError as e:
            raise ZeroNormError(str(e), step=step) from None
        if step in wanted:
            snapshots.append(InversionSnapshot(step, state["x"].copy(), float(objective.data)))
        (grad,) = gradient(objective, [x])
        direction = np.sign(grad.data) if cfg.signed else grad.data
        optimizer.lr = cfg.lr_at(step)
        optimizer.step(state, {"x": direction})
        if cfg.boxed:
            state["x"] = np.clip(state["x"], -cfg.box_bound, cfg.box_bound)
        if cfg.log_every and (step + 1) % cfg.log_every == 0:
            logger.info(f"IG step {step + 1}/{cfg.k}: objective={float(objective.data):.6f}")

    snapshots.append(InversionSnapshot(cfg.k, state["x"].copy(),
                                       _objective_value(model, state["x"], y, target, cfg, cfg.k)))
    return snapshots
