"""
Desk-scale image classifier.

Architecture (image_size S, C input channels, K classes):

    layer          output shape       parameters
    conv0 3x3      (8, S, S)          8*C*9 + 8
    relu, pool2    (8, S/2, S/2)
    conv1 3x3      (16, S/2, S/2)     16*8*9 + 16
    relu, pool2    (16, S/4, S/4)
    head linear    (K,)               16*(S/4)^2*K + K

Parameter order: conv0.weight, conv0.bias, conv1.weight, conv1.bias,
head.weight, head.bias. Weights are He-normal (std sqrt(2 / fan_in)),
biases zero. For S=24, C=1, K=2 that is 2402 parameters.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from autodiff import Tensor, as_tensor, dtype_for
from autodiff import ops
from errors import ContractViolation, ShapeMismatch
from nets.base import BoundParams, Model
from nets.params import ParameterSet, he_normal, zeros

logger = logging.getLogger(__name__)


class ClassifierArch(BaseModel):
    image_size: int = Field(24, ge=1)
    in_channels: int = Field(1, ge=1)
    num_classes: int = Field(2, ge=2)
    conv_channels: Tuple[int, ...] = (8, 16)
    kernel_size: int = 3
    precision: str = "f64"


class Classifier(Model):
    def __init__(self, arch: ClassifierArch, parameters: ParameterSet):
        self.arch = arch
        self.parameters = parameters
        self.num_classes = arch.num_classes
        self.input_shape = (arch.image_size, arch.image_size)
        self.summary: Optional[dict] = None

    @property
    def num_conv_layers(self) -> int:
        return len(self.arch.conv_channels)

    def _as_batch(self, x: Tensor) -> Tensor:
        s, c = self.arch.image_size, self.arch.in_channels
        if x.shape == (s, s) and c == 1:
            return ops.reshape(x, (1, 1, s, s))
        if x.ndim == 3 and x.shape[1:] == (s, s) and c == 1:
            return ops.reshape(x, (x.shape[0], 1, s, s))
        if x.ndim == 3 and x.shape == (c, s, s):
            return ops.reshape(x, (1, c, s, s))
        if x.ndim == 4 and x.shape[1:] == (c, s, s):
            return x
        raise ShapeMismatch("classifier input", x.shape, (c, s, s))

    def forward(self, x, params: Optional[BoundParams] = None,
                capture: Optional[List[Tensor]] = None) -> Tensor:
        """Class scores of shape (N, K); post-relu conv activations go to ``capture``"""
        p = params if params is not None else self.parameters.constants()
        h = self._as_batch(as_tensor(x))
        for i in range(self.num_conv_layers):
            h = ops.relu(ops.conv2d(h, p[f"conv{i}.weight"], p[f"conv{i}.bias"], padding="same"))
            if capture is not None:
                capture.append(h)
            h = ops.mean_pool2d(h, 2)
        h = ops.reshape(h, (h.shape[0], -1))
        return ops.add(ops.matmul(h, p["head.weight"]), p["head.bias"])

    def loss(self, x, y: int, params: Optional[BoundParams] = None) -> Tensor:
        y = self.check_label(y)
        return ops.softmax_cross_entropy(self.forward(x, params), [y])

    def predict(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=self.parameters["head.weight"].dtype)
        if images.ndim == 2:
            images = images[None]
        return np.argmax(self.forward(Tensor(images)).data, axis=1)


def build_classifier(arch: ClassifierArch, seed: int) -> Classifier:
    """Seeded He-normal initialization of the documented architecture"""
    pools = 2 ** len(arch.conv_channels)
    if arch.image_size % pools:
        raise ContractViolation(
            f"image size {arch.image_size} is not divisible by {pools} for {len(arch.conv_channels)} pooling stages"
        )
    if arch.kernel_size % 2 == 0:
        raise ContractViolation(f"kernel size must be odd, got {arch.kernel_size}")
    dtype = dtype_for(arch.precision)
    rng = np.random.default_rng(seed)
    k = arch.kernel_size
    arrays = {}
    channels_in = arch.in_channels
    for i, channels_out in enumerate(arch.conv_channels):
        fan_in = channels_in * k * k
        arrays[f"conv{i}.weight"] = he_normal(rng, (channels_out, channels_in, k, k), fan_in, dtype=dtype)
        arrays[f"conv{i}.bias"] = zeros((channels_out,), dtype=dtype)
        channels_in = channels_out
    side = arch.image_size // pools
    features = channels_in * side * side
    arrays["head.weight"] = he_normal(rng, (features, arch.num_classes), features, dtype=dtype)
    arrays["head.bias"] = zeros((arch.num_classes,), dtype=dtype)
    clf = Classifier(arch, ParameterSet(arrays))
    logger.info(f"Built classifier with {clf.parameter_count} parameters (seed={seed})")
    return clf


def classifier_loss(clf: Model, x, y: int, params: Optional[BoundParams] = None) -> Tensor:
    """Softmax cross-entropy of the model's scores at label ``y``"""
    return clf.loss(x, y, params)
