"""Differentiable primitives. Backward passes are built from other primitives."""

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from autodiff.tensor import Tensor, common_record, is_recording
from errors import ContractViolation, ShapeMismatch

Grads = Tuple[Optional[Tensor], ...]


class Function:
    """Base class for differentiable operations.

    Subclasses implement ``forward`` on numpy arrays and ``backward`` on
    Tensors. ``needs`` tells ``backward`` which inputs want a gradient.
    """

    name = "function"
    finite_output = False

    def __init__(self):
        self.inputs: Tuple[Tensor, ...] = ()
        self.output: Optional[Tensor] = None

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: Tensor, needs: Sequence[bool]) -> Grads:
        raise NotImplementedError

    def __call__(self, *inputs: Tensor) -> Tensor:
        data = self.forward(*(t.data for t in inputs))
        if self.finite_output and not np.all(np.isfinite(data)):
            raise ContractViolation(f"{self.name}: non-finite output")
        out = Tensor(data)
        record = common_record(inputs)
        if record is not None and is_recording():
            self.inputs = tuple(inputs)
            self.output = out
            record.append(self, inputs, out)
        return out


def _broadcast_shape(op: str, a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ShapeMismatch(op, a, b) from None


class SumTo(Function):
    """Sum a broadcast result back down to ``shape``"""

    name = "sum_to"

    def __init__(self, shape: Tuple[int, ...]):
        super().__init__()
        self.shape = tuple(shape)

    def forward(self, x):
        lead = x.ndim - len(self.shape)
        axes = tuple(range(lead)) + tuple(
            lead + i for i, n in enumerate(self.shape) if n == 1 and x.shape[lead + i] != 1
        )
        out = x.sum(axis=axes, keepdims=True) if axes else x
        return out.reshape(self.shape)

    def backward(self, grad, needs):
        return (BroadcastTo(self.inputs[0].shape)(grad),)


class BroadcastTo(Function):
    name = "broadcast_to"

    def __init__(self, shape: Tuple[int, ...]):
        super().__init__()
        self.shape = tuple(shape)

    def forward(self, x):
        return np.array(np.broadcast_to(x, self.shape))

    def backward(self, grad, needs):
        return (SumTo(self.inputs[0].shape)(grad),)


def reduce_to(grad: Tensor, shape: Tuple[int, ...]) -> Tensor:
    if grad.shape == tuple(shape):
        return grad
    return SumTo(shape)(grad)


class Add(Function):
    name = "add"

    def forward(self, a, b):
        _broadcast_shape(self.name, a.shape, b.shape)
        return a + b

    def backward(self, grad, needs):
        a, b = self.inputs
        return (
            reduce_to(grad, a.shape) if needs[0] else None,
            reduce_to(grad, b.shape) if needs[1] else None,
        )


class Sub(Function):
    name = "sub"

    def forward(self, a, b):
        _broadcast_shape(self.name, a.shape, b.shape)
        return a - b

    def backward(self, grad, needs):
        a, b = self.inputs
        return (
            reduce_to(grad, a.shape) if needs[0] else None,
            reduce_to(Scale(-1.0)(grad), b.shape) if needs[1] else None,
        )


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        _broadcast_shape(self.name, a.shape, b.shape)
        return a * b

    def backward(self, grad, needs):
        a, b = self.inputs
        return (
            reduce_to(Mul()(grad, b), a.shape) if needs[0] else None,
            reduce_to(Mul()(grad, a), b.shape) if needs[1] else None,
        )


class Div(Function):
    name = "div"
    finite_output = True

    def forward(self, a, b):
        _broadcast_shape(self.name, a.shape, b.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / b

    def backward(self, grad, needs):
        a, b = self.inputs
        grad_a = grad_b = None
        if needs[0]:
            grad_a = reduce_to(Div()(grad, b), a.shape)
        if needs[1]:
            # d(a/b)/db = -(a/b)/b
            grad_b = reduce_to(Scale(-1.0)(Div()(Mul()(grad, self.output), b)), b.shape)
        return grad_a, grad_b


class Scale(Function):
    name = "scale"

    def __init__(self, factor: float):
        super().__init__()
        self.factor = float(factor)

    def forward(self, x):
        return x * x.dtype.type(self.factor)

    def backward(self, grad, needs):
        return (Scale(self.factor)(grad),)


class MatMul(Function):
    name = "matmul"

    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeMismatch(self.name, a.shape, b.shape)
        return a @ b

    def backward(self, grad, needs):
        a, b = self.inputs
        return (
            MatMul()(grad, Transpose((1, 0))(b)) if needs[0] else None,
            MatMul()(Transpose((1, 0))(a), grad) if needs[1] else None,
        )


class Transpose(Function):
    name = "transpose"

    def __init__(self, axes: Tuple[int, ...]):
        super().__init__()
        self.axes = tuple(axes)

    def forward(self, x):
        if sorted(self.axes) != list(range(x.ndim)):
            raise ShapeMismatch(self.name, x.shape, self.axes)
        return np.ascontiguousarray(np.transpose(x, self.axes))

    def backward(self, grad, needs):
        return (Transpose(tuple(np.argsort(self.axes)))(grad),)


class Reshape(Function):
    name = "reshape"

    def __init__(self, shape: Tuple[int, ...]):
        super().__init__()
        self.shape = tuple(shape)

    def forward(self, x):
        try:
            return x.reshape(self.shape)
        except ValueError:
            raise ShapeMismatch(self.name, x.shape, self.shape) from None

    def backward(self, grad, needs):
        return (Reshape(self.inputs[0].shape)(grad),)


class Relu(Function):
    name = "relu"

    def forward(self, x):
        return np.maximum(x, 0)

    def backward(self, grad, needs):
        # relu'(0) is taken as 0
        mask = Tensor((self.inputs[0].data > 0).astype(grad.dtype))
        return (Mul()(grad, mask),)


class Abs(Function):
    name = "abs"

    def forward(self, x):
        return np.abs(x)

    def backward(self, grad, needs):
        return (Mul()(grad, Tensor(np.sign(self.inputs[0].data).astype(grad.dtype))),)


class Sum(Function):
    name = "sum"

    def __init__(self, axis=None, keepdims: bool = False):
        super().__init__()
        self.axis = axis
        self.keepdims = keepdims

    def forward(self, x):
        return np.asarray(x.sum(axis=self.axis, keepdims=self.keepdims))

    def backward(self, grad, needs):
        in_shape = self.inputs[0].shape
        if not self.keepdims and self.axis is not None:
            axes = (self.axis,) if isinstance(self.axis, int) else tuple(self.axis)
            kept = list(in_shape)
            for ax in axes:
                kept[ax % len(in_shape)] = 1
            grad = Reshape(tuple(kept))(grad)
        return (BroadcastTo(in_shape)(grad),)


class Dot(Function):
    name = "dot"

    def forward(self, a, b):
        if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
            raise ShapeMismatch(self.name, a.shape, b.shape)
        return np.asarray(np.dot(a, b))

    def backward(self, grad, needs):
        a, b = self.inputs
        return (
            Mul()(grad, b) if needs[0] else None,
            Mul()(grad, a) if needs[1] else None,
        )


class L2Norm(Function):
    name = "l2_norm"
    finite_output = True

    def forward(self, x):
        return np.asarray(np.sqrt(np.sum(x * x)))

    def backward(self, grad, needs):
        x = self.inputs[0]
        if float(self.output.data) == 0.0:
            # gradient at the zero vector is defined as zero
            return (Tensor(np.zeros(x.shape, dtype=x.dtype)),)
        return (Mul()(Div()(grad, self.output), x),)


class Softmax(Function):
    name = "softmax"
    finite_output = True

    def forward(self, x):
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)

    def backward(self, grad, needs):
        s = self.output
        inner = Sum(axis=-1, keepdims=True)(Mul()(grad, s))
        return (Mul()(s, Sub()(grad, inner)),)


class SoftmaxCrossEntropy(Function):
    """Mean over rows of -log softmax(logits)[label]"""

    name = "softmax_cross_entropy"
    finite_output = True

    def __init__(self, labels: Sequence[int]):
        super().__init__()
        self.labels = np.asarray(labels, dtype=np.int64).reshape(-1)

    def forward(self, logits):
        if logits.ndim != 2 or logits.shape[0] != self.labels.shape[0]:
            raise ShapeMismatch(self.name, logits.shape, self.labels.shape)
        if np.any(self.labels < 0) or np.any(self.labels >= logits.shape[1]):
            raise ContractViolation(f"{self.name}: label out of range for {logits.shape[1]} classes")
        top = logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(logits - top).sum(axis=1)) + top[:, 0]
        picked = logits[np.arange(logits.shape[0]), self.labels]
        return np.asarray(np.mean(log_z - picked))

    def backward(self, grad, needs):
        logits = self.inputs[0]
        n, k = logits.shape
        onehot = np.zeros((n, k), dtype=logits.dtype)
        onehot[np.arange(n), self.labels] = 1.0
        probs = Softmax()(logits)
        return (Mul()(Sub()(probs, Tensor(onehot)), Scale(1.0 / n)(grad)),)


def _check_widths(op: str, shape, widths) -> Tuple[Tuple[int, int], ...]:
    widths = tuple((int(lo), int(hi)) for lo, hi in widths)
    if len(widths) != len(shape) or any(lo < 0 or hi < 0 for lo, hi in widths):
        raise ShapeMismatch(op, shape, [w for pair in widths for w in pair])
    return widths


class Pad(Function):
    """Zero padding; ``widths`` is one (before, after) pair per axis"""

    name = "pad"

    def __init__(self, widths):
        super().__init__()
        self.widths = widths

    def forward(self, x):
        self.widths = _check_widths(self.name, x.shape, self.widths)
        return np.pad(x, self.widths)

    def backward(self, grad, needs):
        return (Crop(self.widths)(grad),)


class Crop(Function):
    """Inverse of Pad: drop ``widths`` elements from each side of each axis"""

    name = "crop"

    def __init__(self, widths):
        super().__init__()
        self.widths = widths

    def forward(self, x):
        self.widths = _check_widths(self.name, x.shape, self.widths)
        if any(lo + hi > n for (lo, hi), n in zip(self.widths, x.shape)):
            raise ShapeMismatch(self.name, x.shape, [w for pair in self.widths for w in pair])
        index = tuple(slice(lo, n - hi) for (lo, hi), n in zip(self.widths, x.shape))
        return x[index].copy()

    def backward(self, grad, needs):
        return (Pad(self.widths)(grad),)


class Concat(Function):
    """Concatenate 1-D tensors"""

    name = "concat"

    def forward(self, *parts):
        if any(p.ndim != 1 for p in parts):
            raise ShapeMismatch(self.name, *(p.shape for p in parts))
        return np.concatenate(parts)

    def backward(self, grad, needs):
        total = grad.shape[0]
        out, start = [], 0
        for part, need in zip(self.inputs, needs):
            stop = start + part.shape[0]
            out.append(Crop(((start, total - stop),))(grad) if need else None)
            start = stop
        return tuple(out)


class EmbedLookup(Function):
    name = "embed_lookup"

    def __init__(self, ids):
        super().__init__()
        self.ids = np.asarray(ids, dtype=np.int64)

    def forward(self, table):
        if table.ndim != 2:
            raise ShapeMismatch(self.name, table.shape, self.ids.shape)
        if np.any(self.ids < 0) or np.any(self.ids >= table.shape[0]):
            raise ContractViolation(f"{self.name}: id out of range for table of {table.shape[0]} rows")
        return table[self.ids]

    def backward(self, grad, needs):
        return (ScatterAdd(self.ids, self.inputs[0].shape[0])(grad),)


class ScatterAdd(Function):
    """Adjoint of EmbedLookup: accumulate rows into a (rows, dim) table"""

    name = "scatter_add"

    def __init__(self, ids, rows: int):
        super().__init__()
        self.ids = np.asarray(ids, dtype=np.int64)
        self.rows = rows

    def forward(self, values):
        out = np.zeros((self.rows, values.shape[-1]), dtype=values.dtype)
        np.add.at(out, self.ids, values)
        return out

    def backward(self, grad, needs):
        return (EmbedLookup(self.ids)(grad),)


class Im2Col(Function):
    """(N, C, H, W) -> (N*Ho*Wo, C*kh*kw) patch matrix of a valid correlation"""

    name = "im2col"

    def __init__(self, kh: int, kw: int):
        super().__init__()
        self.kh, self.kw = kh, kw

    def forward(self, x):
        if x.ndim != 4 or x.shape[2] < self.kh or x.shape[3] < self.kw:
            raise ShapeMismatch(self.name, x.shape, (self.kh, self.kw))
        n, c, h, w = x.shape
        windows = sliding_window_view(x, (self.kh, self.kw), axis=(2, 3))
        ho, wo = h - self.kh + 1, w - self.kw + 1
        return np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * self.kh * self.kw)

    def backward(self, grad, needs):
        return (Col2Im(self.inputs[0].shape, self.kh, self.kw)(grad),)


class Col2Im(Function):
    name = "col2im"

    def __init__(self, shape: Tuple[int, int, int, int], kh: int, kw: int):
        super().__init__()
        self.shape = tuple(shape)
        self.kh, self.kw = kh, kw

    def forward(self, cols):
        n, c, h, w = self.shape
        ho, wo = h - self.kh + 1, w - self.kw + 1
        patches = cols.reshape(n, ho, wo, c, self.kh, self.kw)
        out = np.zeros(self.shape, dtype=cols.dtype)
        for i in range(self.kh):
            for j in range(self.kw):
                out[:, :, i:i + ho, j:j + wo] += patches[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return out

    def backward(self, grad, needs):
        return (Im2Col(self.kh, self.kw)(grad),)
