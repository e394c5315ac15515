from typing import Optional, Sequence

import numpy as np

from autodiff import Tensor, as_tensor
from autodiff import ops
from errors import ShapeMismatch
from nets.base import BoundParams, Model
from nets.params import ParameterSet


class QuadraticModel(Model):
    """L = (theta . x - y)^2 / 2, with the class id used as the regression target"""

    def __init__(self, theta: Sequence[float], num_classes: int = 2):
        theta = np.asarray(theta, dtype=np.float64)
        self.parameters = ParameterSet({"theta": theta})
        self.num_classes = num_classes
        self.input_shape = theta.shape

    def loss(self, x, y: int, params: Optional[BoundParams] = None) -> Tensor:
        y = self.check_label(y)
        x = as_tensor(x)
        if x.shape != self.input_shape:
            raise ShapeMismatch("quadratic model input", x.shape, self.input_shape)
        p = params if params is not None else self.parameters.constants()
        residual = ops.sub(ops.dot(p["theta"], x), float(y))
        return ops.scale(ops.mul(residual, residual), 0.5)
