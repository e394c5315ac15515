"""
Class-conditioned epsilon predictor.

A resolution-preserving stack of ``depth`` 3x3 "same" convolutions:
``depth - 1`` hidden blocks of ``channels`` filters with relu, then one
output convolution back to a single channel. The timestep's sinusoidal
embedding goes through a linear map, the class embedding row is added,
and a relu gives the conditioning vector e. Each hidden block adds
``e @ block{l}.emb.weight`` as a per-channel bias before its relu.
"""

import logging
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, Field

from autodiff import Tensor, as_tensor, dtype_for, no_record
from autodiff import ops
from errors import ContractViolation, ShapeMismatch
from nets.base import BoundParams
from nets.params import ParameterSet, he_normal, zeros

logger = logging.getLogger(__name__)

IntOrArray = Union[int, np.ndarray]


class DenoiserArch(BaseModel):
    num_timesteps: int = Field(200, ge=1)
    num_classes: int = Field(2, ge=1)
    channels: int = Field(32, ge=1)
    depth: int = Field(4, ge=2)
    time_dim: int = Field(32, ge=2)
    embed_dim: int = Field(64, ge=1)
    kernel_size: int = 3
    output_gain: float = 0.1
    precision: str = "f64"


def sinusoidal_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """(N,) timesteps -> (N, dim) [sin | cos] features at geometric frequencies"""
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    angles = t[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((emb.shape[0], 1))], axis=1)
    return emb


class Denoiser:
    def __init__(self, arch: DenoiserArch, parameters: ParameterSet):
        self.arch = arch
        self.parameters = parameters
        self.summary: Optional[dict] = None

    @property
    def dtype(self):
        return self.parameters["out.conv.bias"].dtype

    @property
    def parameter_count(self) -> int:
        return self.parameters.count

    def check_inputs(self, t: np.ndarray, c: np.ndarray) -> None:
        if np.any(t < 1) or np.any(t > self.arch.num_timesteps):
            raise ContractViolation(f"timestep out of [1, {self.arch.num_timesteps}]: {t.tolist()}")
        if np.any(c < 0) or np.any(c >= self.arch.num_classes):
            raise ContractViolation(f"class id out of [0, {self.arch.num_classes}): {c.tolist()}")

    def forward(self, x: Tensor, t: np.ndarray, c: np.ndarray, params: Optional[BoundParams] = None) -> Tensor:
        """x (N, H, W), t (N,), c (N,) -> predicted noise (N, H, W)"""
        p = params if params is not None else self.parameters.constants()
        n, h, w = x.shape
        temb = Tensor(sinusoidal_embedding(t, self.arch.time_dim).astype(self.dtype))
        e = ops.add(ops.matmul(temb, p["time.weight"]), p["time.bias"])
        e = ops.relu(ops.add(e, ops.embed_lookup(p["class.embedding"], c)))
        hidden = ops.reshape(x, (n, 1, h, w))
        for layer in range(self.arch.depth - 1):
            hidden = ops.conv2d(hidden, p[f"block{layer}.conv.weight"], p[f"block{layer}.conv.bias"], padding="same")
            bias = ops.reshape(ops.matmul(e, p[f"block{layer}.emb.weight"]), (n, self.arch.channels, 1, 1))
            hidden = ops.relu(ops.add(hidden, bias))
        out = ops.conv2d(hidden, p["out.conv.weight"], p["out.conv.bias"], padding="same")
        return ops.reshape(out, (n, h, w))

    def predict(self, x_t: np.ndarray, t: IntOrArray, c: IntOrArray) -> np.ndarray:
        """Unrecorded prediction on numpy input of shape (H, W) or (N, H, W)"""
        with no_record():
            return denoiser_predict(self, np.asarray(x_t, dtype=self.dtype), t, c).data


def denoiser_predict(den: Denoiser, x_t, t: IntOrArray, c: IntOrArray) -> Tensor:
    """Predicted noise, same shape as ``x_t``; recorded when ``x_t`` is"""
    x_t = as_tensor(x_t)
    single = x_t.ndim == 2
    if single:
        x_t = ops.reshape(x_t, (1,) + x_t.shape)
    if x_t.ndim != 3:
        raise ShapeMismatch("denoiser input", x_t.shape, ("N", "H", "W"))
    n = x_t.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=np.int64), (n,))
    c = np.broadcast_to(np.asarray(c, dtype=np.int64), (n,))
    den.check_inputs(t, c)
    out = den.forward(x_t, t, c)
    return ops.reshape(out, out.shape[1:]) if single else out


def build_denoiser(arch: DenoiserArch, seed: int) -> Denoiser:
    dtype = dtype_for(arch.precision)
    rng = np.random.default_rng(seed)
    k, ch = arch.kernel_size, arch.channels
    arrays = {
        "time.weight": he_normal(rng, (arch.time_dim, arch.embed_dim), arch.time_dim, dtype=dtype),
        "time.bias": zeros((arch.embed_dim,), dtype=dtype),
        "class.embedding": (rng.standard_normal((arch.num_classes, arch.embed_dim)) * 0.1).astype(dtype),
    }
    channels_in = 1
    for layer in range(arch.depth - 1):
        arrays[f"block{layer}.conv.weight"] = he_normal(rng, (ch, channels_in, k, k), channels_in * k * k, dtype=dtype)
        arrays[f"block{layer}.conv.bias"] = zeros((ch,), dtype=dtype)
        arrays[f"block{layer}.emb.weight"] = he_normal(rng, (arch.embed_dim, ch), arch.embed_dim, gain=0.5, dtype=dtype)
        channels_in = ch
    arrays["out.conv.weight"] = he_normal(rng, (1, ch, k, k), ch * k * k, gain=arch.output_gain, dtype=dtype)
    arrays["out.conv.bias"] = zeros((1,), dtype=dtype)
    den = Denoiser(arch, ParameterSet(arrays))
    logger.info(f"Built denoiser with {den.parameter_count} parameters (seed={seed})")
    return den
