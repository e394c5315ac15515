from autodiff.finite_diff import finite_diff_gradient
from autodiff.ops import OP_KINDS, apply
from autodiff.tensor import (
    ComputationRecord,
    Tensor,
    as_tensor,
    dtype_for,
    gradient,
    no_record,
    precision,
    set_default_precision,
)

__all__ = [
    "OP_KINDS",
    "ComputationRecord",
    "Tensor",
    "apply",
    "as_tensor",
    "dtype_for",
    "finite_diff_gradient",
    "gradient",
    "no_record",
    "precision",
    "set_default_precision",
]
