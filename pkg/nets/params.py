from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from autodiff import ComputationRecord, Tensor
from errors import ContractViolation, ShapeMismatch


class ParameterSet:
    """Ordered, named parameter arrays.

    The insertion order is the flattening order used by ``flatten``,
    ``unflatten`` and every flat parameter gradient.
    """

    def __init__(self, arrays: Mapping[str, np.ndarray]):
        self._arrays: Dict[str, np.ndarray] = {name: np.asarray(a) for name, a in arrays.items()}

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        if name not in self._arrays:
            raise ContractViolation(f"unknown parameter {name!r}")
        value = np.asarray(value, dtype=self._arrays[name].dtype)
        if value.shape != self._arrays[name].shape:
            raise ShapeMismatch(f"parameter {name}", value.shape, self._arrays[name].shape)
        self._arrays[name] = value

    def items(self):
        return self._arrays.items()

    @property
    def names(self) -> List[str]:
        return list(self._arrays)

    @property
    def shapes(self) -> List[Tuple[int, ...]]:
        return [a.shape for a in self._arrays.values()]

    @property
    def count(self) -> int:
        return int(sum(a.size for a in self._arrays.values()))

    def flatten(self) -> np.ndarray:
        if not self._arrays:
            return np.zeros(0)
        return np.concatenate([a.reshape(-1) for a in self._arrays.values()])

    def unflatten(self, flat: np.ndarray) -> "ParameterSet":
        flat = np.asarray(flat)
        if flat.shape != (self.count,):
            raise ShapeMismatch("unflatten", flat.shape, (self.count,))
        arrays, start = {}, 0
        for name, a in self._arrays.items():
            stop = start + a.size
            arrays[name] = flat[start:stop].reshape(a.shape).astype(a.dtype, copy=True)
            start = stop
        return ParameterSet(arrays)

    def bind(self, record: ComputationRecord) -> Dict[str, Tensor]:
        """Register every parameter as a leaf of ``record``"""
        return {name: record.leaf(a) for name, a in self._arrays.items()}

    def constants(self) -> Dict[str, Tensor]:
        return {name: Tensor(a) for name, a in self._arrays.items()}

    def copy(self) -> "ParameterSet":
        return ParameterSet({name: a.copy() for name, a in self._arrays.items()})

    def astype(self, dtype) -> "ParameterSet":
        return ParameterSet({name: a.astype(dtype) for name, a in self._arrays.items()})

    def to_named_arrays(self, prefix: str = "") -> Dict[str, np.ndarray]:
        return {f"{prefix}{name}": a for name, a in self._arrays.items()}

    def load_named_arrays(self, arrays: Mapping[str, np.ndarray], prefix: str = "") -> None:
        """Replace every parameter from ``arrays``; names and shapes must match exactly"""
        expected = {f"{prefix}{name}" for name in self._arrays}
        present = {k for k in arrays if k.startswith(prefix)}
        if expected != present:
            missing = sorted(expected - present)
            extra = sorted(present - expected)
            raise ContractViolation(f"checkpoint does not match the architecture (missing {missing}, extra {extra})")
        for name in self._arrays:
            self[name] = arrays[f"{prefix}{name}"]

    def equals(self, other: "ParameterSet") -> bool:
        if self.names != other.names:
            return False
        return all(np.array_equal(a, other[name]) for name, a in self._arrays.items())


def he_normal(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, gain: float = 1.0,
              dtype=np.float64) -> np.ndarray:
    """Zero-mean normal init with standard deviation gain * sqrt(2 / fan_in)"""
    return (rng.standard_normal(shape) * gain * np.sqrt(2.0 / fan_in)).astype(dtype)


def zeros(shape: Tuple[int, ...], dtype=np.float64) -> np.ndarray:
    return np.zeros(shape, dtype=dtype)
