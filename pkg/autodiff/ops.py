"""
Public operation vocabulary.

Shape rules per op kind:
    add, sub, mul, div      numpy broadcasting of the two operands
    scale                   any shape, constant real factor
    matmul                  (m, k) @ (k, n) -> (m, n)
    conv2d                  x (N, C, H, W), w (F, C, kh, kw), b (F,) ->
                            (N, F, H-kh+1, W-kw+1) for "valid",
                            (N, F, H, W) for "same" (odd kernels only);
                            cross-correlation, no filter flip
    relu, abs               elementwise
    sum, mean               all elements, or the given axes
    l2_norm                 any shape -> scalar
    dot                     (n,) . (n,) -> scalar
    softmax_cross_entropy   logits (N, K) with N integer labels -> scalar mean
    reshape                 same element count
    pad                     one (before, after) zero-width pair per axis
    embed_lookup            table (V, D) with integer ids (...) -> (..., D)
"""

from typing import Callable, Dict, Sequence, Tuple, Union

import numpy as np

from autodiff import functions as F
from autodiff.tensor import Tensor, TensorLike, as_tensor
from errors import ContractViolation, ShapeMismatch

Axis = Union[None, int, Tuple[int, ...]]


def _pair(a: TensorLike, b: TensorLike) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def add(a: TensorLike, b: TensorLike) -> Tensor:
    return F.Add()(*_pair(a, b))


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    return F.Sub()(*_pair(a, b))


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    return F.Mul()(*_pair(a, b))


def div(a: TensorLike, b: TensorLike) -> Tensor:
    return F.Div()(*_pair(a, b))


def scale(x: TensorLike, factor: float) -> Tensor:
    return F.Scale(factor)(as_tensor(x))


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    return F.MatMul()(*_pair(a, b))


def transpose(x: TensorLike, axes: Sequence[int]) -> Tensor:
    return F.Transpose(tuple(axes))(as_tensor(x))


def reshape(x: TensorLike, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    if -1 in shape:
        known = int(np.prod([n for n in shape if n != -1]))
        if known == 0 or x.size % known:
            raise ShapeMismatch("reshape", x.shape, shape)
        shape = tuple(x.size // known if n == -1 else n for n in shape)
    return F.Reshape(shape)(x)


def relu(x: TensorLike) -> Tensor:
    return F.Relu()(as_tensor(x))


def abs(x: TensorLike) -> Tensor:  # noqa: A001
    return F.Abs()(as_tensor(x))


def sum(x: TensorLike, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return F.Sum(axis, keepdims)(as_tensor(x))


def mean(x: TensorLike, axis: Axis = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([x.shape[a] for a in axes]))
    if count == 0:
        raise ContractViolation("mean of an empty tensor")
    return scale(sum(x, axis, keepdims), 1.0 / count)


def l2_norm(x: TensorLike) -> Tensor:
    return F.L2Norm()(as_tensor(x))


def dot(a: TensorLike, b: TensorLike) -> Tensor:
    return F.Dot()(*_pair(a, b))


def softmax(x: TensorLike) -> Tensor:
    return F.Softmax()(as_tensor(x))


def softmax_cross_entropy(logits: TensorLike, labels: Sequence[int]) -> Tensor:
    logits = as_tensor(logits)
    if logits.ndim == 1:
        logits = reshape(logits, (1, -1))
    return F.SoftmaxCrossEntropy(np.atleast_1d(labels))(logits)


def pad(x: TensorLike, widths: Sequence[Tuple[int, int]]) -> Tensor:
    return F.Pad(widths)(as_tensor(x))


def crop(x: TensorLike, widths: Sequence[Tuple[int, int]]) -> Tensor:
    return F.Crop(widths)(as_tensor(x))


def concat(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ContractViolation("concat of no tensors")
    return F.Concat()(*[as_tensor(p) for p in parts])


def flatten(x: TensorLike) -> Tensor:
    return reshape(x, (-1,))


def embed_lookup(table: TensorLike, ids) -> Tensor:
    return F.EmbedLookup(ids)(as_tensor(table))


def conv2d(x: TensorLike, weight: TensorLike, bias: TensorLike = None, padding: str = "valid") -> Tensor:
    x, weight = _pair(x, weight)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch("conv2d", x.shape, weight.shape)
    filters, _, kh, kw = weight.shape
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ContractViolation(f"conv2d: 'same' padding needs odd kernels, got {kh}x{kw}")
        x = pad(x, ((0, 0), (0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)))
    elif padding != "valid":
        raise ContractViolation(f"conv2d: unknown padding {padding!r}")
    n, _, h, w = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    if ho < 1 or wo < 1:
        raise ShapeMismatch("conv2d", x.shape, weight.shape)
    cols = F.Im2Col(kh, kw)(x)
    kernel = transpose(reshape(weight, (filters, -1)), (1, 0))
    out = transpose(reshape(matmul(cols, kernel), (n, ho, wo, filters)), (0, 3, 1, 2))
    if bias is not None:
        bias = as_tensor(bias, like=out)
        if bias.shape != (filters,):
            raise ShapeMismatch("conv2d bias", bias.shape, (filters,))
        out = add(out, reshape(bias, (1, filters, 1, 1)))
    return out


def mean_pool2d(x: TensorLike, factor: int = 2) -> Tensor:
    x = as_tensor(x)
    n, c, h, w = x.shape
    if h % factor or w % factor:
        raise ShapeMismatch("mean_pool2d", x.shape, (factor, factor))
    blocks = reshape(x, (n, c, h // factor, factor, w // factor, factor))
    return mean(blocks, axis=(3, 5))


_OPS: Dict[str, Callable[..., Tensor]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "matmul": matmul,
    "conv2d": conv2d,
    "relu": relu,
    "sum": sum,
    "mean": mean,
    "l2_norm": l2_norm,
    "dot": dot,
    "softmax_cross_entropy": softmax_cross_entropy,
    "reshape": reshape,
    "pad": pad,
    "embed_lookup": embed_lookup,
}

OP_KINDS = tuple(_OPS)


def apply(op_kind: str, inputs: Sequence[TensorLike], **attrs) -> Tensor:
    """Apply one op kind of the vocabulary to ``inputs``.

    Non-tensor arguments (scale factor, labels, shapes, widths, ids,
    padding mode, axes) are passed as keyword attributes.
    """
    try:
        op = _OPS[op_kind]
    except KeyError:
        raise ContractViolation(f"unknown op kind {op_kind!r}") from None
    return op(*inputs, **attrs)
