from typing import Callable, Union

import numpy as np

from autodiff.tensor import Tensor, TensorLike
from errors import ContractViolation

ScalarFn = Callable[[Tensor], Union[Tensor, float]]


def _evaluate(f: ScalarFn, x: np.ndarray) -> float:
    # x is a fresh unrecorded tensor; f may still build its own records internally
    value = f(Tensor(x))
    value = float(value.data) if isinstance(value, Tensor) else float(value)
    if not np.isfinite(value):
        raise ContractViolation("finite_diff_gradient: function returned a non-finite value")
    return value


def finite_diff_gradient(f: ScalarFn, x: TensorLike, h: float = 1e-5) -> Tensor:
    """Central-difference estimate of df/dx, one coordinate at a time"""
    if not h > 0:
        raise ContractViolation(f"finite_diff_gradient: step size must be positive, got {h}")
    base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        upper = _evaluate(f, base)
        flat[i] = original - h
        lower = _evaluate(f, base)
        flat[i] = original
        out[i] = (upper - lower) / (2.0 * h)
    return Tensor(grad)
