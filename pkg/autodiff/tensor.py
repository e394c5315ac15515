"""
Tensor values and the computation record that makes them differentiable.

A ComputationRecord is an append-only list of nodes. Leaves are created
explicitly with ``record.leaf(...)``; every operation applied to a recorded
tensor appends one node, so creation order is a topological order.
Backward functions are written with the same tensor operations as the
forward pass, which is what lets ``gradient(..., carry_graph=True)`` return
gradients that can themselves be differentiated.
"""

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ContractViolation

if TYPE_CHECKING:
    from autodiff.functions import Function

_PRECISIONS = {"f32": np.float32, "f64": np.float64}

_state = threading.local()


def _default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.float64)


def set_default_precision(precision: str) -> None:
    """Select single ("f32") or double ("f64") precision for new tensors on this thread"""
    if precision not in _PRECISIONS:
        raise ContractViolation(f"unknown precision {precision!r}, expected one of {sorted(_PRECISIONS)}")
    _state.dtype = _PRECISIONS[precision]


def dtype_for(precision: str) -> type:
    if precision not in _PRECISIONS:
        raise ContractViolation(f"unknown precision {precision!r}, expected one of {sorted(_PRECISIONS)}")
    return _PRECISIONS[precision]


@contextmanager
def precision(name: str) -> Iterator[None]:
    previous = _default_dtype()
    set_default_precision(name)
    try:
        yield
    finally:
        _state.dtype = previous


def is_recording() -> bool:
    return getattr(_state, "recording", True)


@contextmanager
def no_record() -> Iterator[None]:
    """Operations inside the block produce constants even from recorded inputs"""
    previous = is_recording()
    _state.recording = False
    try:
        yield
    finally:
        _state.recording = previous


class Tensor:
    __slots__ = ("data", "record", "record_id")

    def __init__(self, data, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            if isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
                dtype = data.dtype
            else:
                dtype = _default_dtype()
        self.data = np.asarray(data, dtype=dtype)
        self.record: Optional["ComputationRecord"] = None
        self.record_id: Optional[int] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_recorded(self) -> bool:
        return self.record_id is not None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        tag = f", record_id={self.record_id}" if self.is_recorded else ""
        return f"Tensor(shape={list(self.shape)}, dtype={self.dtype}{tag})"

    # Operator sugar; the implementations live in autodiff.ops
    def __add__(self, other):
        from autodiff import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from autodiff import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from autodiff import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from autodiff import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from autodiff import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from autodiff import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from autodiff import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from autodiff import ops
        return ops.div(other, self)

    def __neg__(self):
        from autodiff import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from autodiff import ops
        return ops.matmul(self, other)


TensorLike = Union[Tensor, np.ndarray, float, int, Sequence]


def as_tensor(value: TensorLike, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    if like is not None and not isinstance(value, np.ndarray):
        return Tensor(value, dtype=like.dtype)
    return Tensor(value)


@dataclass
class Node:
    function: Optional["Function"]
    inputs: Tuple[int, ...]

    @property
    def is_leaf(self) -> bool:
        return self.function is None


class ComputationRecord:
    """Single-writer record of the operations applied to its tensors"""

    def __init__(self):
        self.nodes: List[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, value: TensorLike, dtype=None) -> Tensor:
        """Register a fresh differentiable input on this record"""
        tensor = Tensor(value.data.copy() if isinstance(value, Tensor) else value, dtype=dtype)
        tensor.record = self
        tensor.record_id = len(self.nodes)
        self.nodes.append(Node(None, ()))
        return tensor

    def append(self, function: "Function", inputs: Sequence[Tensor], output: Tensor) -> None:
        ids = tuple(t.record_id for t in inputs if t.record is self)
        output.record = self
        output.record_id = len(self.nodes)
        self.nodes.append(Node(function, ids))

    def is_leaf(self, tensor: Tensor) -> bool:
        return tensor.record is self and self.nodes[tensor.record_id].is_leaf


def common_record(inputs: Sequence[Tensor]) -> Optional[ComputationRecord]:
    records = {id(t.record): t.record for t in inputs if t.record is not None}
    if len(records) > 1:
        raise ContractViolation("operands belong to different computation records")
    return next(iter(records.values()), None)


def gradient(scalar: Tensor, wrt: Sequence[Tensor], carry_graph: bool = False) -> List[Tensor]:
    """Reverse-mode derivative of a 0-dimensional recorded tensor.

    With ``carry_graph`` the returned gradients are recorded on the same
    record, so a second ``gradient`` call through them is valid. A ``wrt``
    leaf that ``scalar`` does not depend on gets a zero tensor.
    """
    from autodiff import ops

    if scalar.ndim != 0:
        raise ContractViolation(f"gradient needs a 0-dimensional tensor, got shape {list(scalar.shape)}")
    if not scalar.is_recorded:
        raise ContractViolation("gradient of a tensor that is not on a computation record")
    record = scalar.record
    for t in wrt:
        if not record.is_leaf(t):
            raise ContractViolation("gradient targets must be leaves of the scalar's record")

    targets = {t.record_id for t in wrt}
    # Nodes that lie on some path from a target leaf to the scalar
    relevant = [False] * (scalar.record_id + 1)
    for i in range(scalar.record_id + 1):
        node = record.nodes[i]
        relevant[i] = i in targets or any(relevant[j] for j in node.inputs)

    grads = {scalar.record_id: Tensor(np.ones((), dtype=scalar.dtype))}

    def run() -> None:
        for i in range(scalar.record_id, -1, -1):
            node = record.nodes[i]
            if node.is_leaf or i not in grads or not relevant[i]:
                continue
            upstream = grads.pop(i)
            fn = node.function
            needs = tuple(t.record is record and relevant[t.record_id] for t in fn.inputs)
            if not any(needs):
                continue
            for tensor, need, g in zip(fn.inputs, needs, fn.backward(upstream, needs)):
                if not need or g is None:
                    continue
                j = tensor.record_id
                grads[j] = g if j not in grads else ops.add(grads[j], g)

    if carry_graph:
        run()
    else:
        with no_record():
            run()

    result = []
    for t in wrt:
        g = grads.get(t.record_id)
        result.append(g if g is not None else Tensor(np.zeros(t.shape, dtype=t.dtype)))
    return result
