from typing import Dict, Literal, Mapping

import numpy as np

from errors import ContractViolation

OptimizerKind = Literal["sgd", "adam"]


class Optimizer:
    """In-place update of named numpy arrays from matching gradients"""

    def __init__(self, lr: float):
        if not lr > 0:
            raise ContractViolation(f"learning rate must be positive, got {lr}")
        self.lr = lr

    def step(self, params: Dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        raise NotImplementedError


class SGD(Optimizer):
    """Plain gradient step"""

    def step(self, params, grads):
        for name, g in grads.items():
            params[name] = params[name] - params[name].dtype.type(self.lr) * g


class Adam(Optimizer):
    """Adaptive-moment step with bias correction"""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m = self.m.get(name)
            v = self.v.get(name)
            if m is None:
                m = np.zeros_like(g)
                v = np.zeros_like(g)
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            params[name] = (params[name] - update).astype(params[name].dtype)


def make_optimizer(kind: str, lr: float) -> Optimizer:
    if kind == "adam":
        return Adam(lr)
    if kind == "sgd":
        return SGD(lr)
    raise ContractViolation(f"unknown optimizer kind {kind!r}")
