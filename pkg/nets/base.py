from typing import Mapping, Optional, Tuple

import numpy as np

from autodiff import ComputationRecord, Tensor, as_tensor, gradient
from autodiff import ops
from errors import ContractViolation
from nets.params import ParameterSet

BoundParams = Mapping[str, Tensor]


class Model:
    """A parameterized, differentiable loss L_theta(x, y).

    Subclasses define ``parameters``, ``num_classes``, ``input_shape`` and
    ``loss``. When ``params`` is omitted the stored parameters are used as
    constants.
    """

    parameters: ParameterSet
    num_classes: int
    input_shape: Tuple[int, ...]

    def loss(self, x: Tensor, y: int, params: Optional[BoundParams] = None) -> Tensor:
        raise NotImplementedError

    def check_label(self, y: int) -> int:
        if not 0 <= int(y) < self.num_classes:
            raise ContractViolation(f"class id {y} out of range [0, {self.num_classes})")
        return int(y)

    @property
    def parameter_count(self) -> int:
        return self.parameters.count


def param_gradient(model: Model, x, y: int, carry_graph: bool = False) -> Tensor:
    """Flat dL/dtheta in the model's parameter order.

    When ``x`` is a recorded tensor the parameters are bound on its record,
    so with ``carry_graph`` the result stays differentiable w.r.t. ``x``.
    """
    model.check_label(y)
    x = as_tensor(x)
    record = x.record if x.is_recorded else ComputationRecord()
    bound = model.parameters.bind(record)
    loss = model.loss(x, y, bound)
    grads = gradient(loss, list(bound.values()), carry_graph=carry_graph)
    return ops.concat([ops.flatten(g) for g in grads])


def input_gradient(model: Model, x, y: int) -> np.ndarray:
    """dL/dx at the stored parameters"""
    model.check_label(y)
    record = ComputationRecord()
    leaf = record.leaf(x)
    (grad,) = gradient(model.loss(leaf, y), [leaf])
    return grad.data
