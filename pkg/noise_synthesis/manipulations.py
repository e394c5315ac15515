"""Spatial manipulations of an image (or per-channel image) and of points on it."""

from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from errors import ContractViolation, ShapeMismatch

Point = Tuple[float, float]


def _check_image(op: str, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim < 2:
        raise ShapeMismatch(op, x.shape, ("H", "W"))
    return x


def rotate90(x) -> np.ndarray:
    """Clockwise quarter turn: out[r][c] = x[H-1-c][r]"""
    return np.rot90(_check_image("rotate90", x), -1, axes=(-2, -1)).copy()


def hflip(x) -> np.ndarray:
    """Mirror left-right: out[r][c] = x[r][W-1-c]"""
    return _check_image("hflip", x)[..., ::-1].copy()


MANIPULATIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "rotate90": rotate90,
    "hflip": hflip,
}


def get_manipulation(name: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return MANIPULATIONS[name]
    except KeyError:
        raise ContractViolation(f"unknown manipulation {name!r}, expected one of {sorted(MANIPULATIONS)}") from None


def apply_manipulations(x, names: Sequence[str]) -> np.ndarray:
    """Apply the named manipulations left to right"""
    out = np.asarray(x)
    for name in names:
        out = get_manipulation(name)(out)
    return out


def manipulate_point(point: Point, name: str, shape: Tuple[int, int]) -> Point:
    """Where a pixel-space point lands under the named manipulation of an HxW image"""
    get_manipulation(name)
    r, c = point
    h, w = shape
    if name == "hflip":
        return r, (w - 1) - c
    return c, (h - 1) - r


def manipulate_points(point: Point, names: Sequence[str], shape: Tuple[int, int]) -> Point:
    h, w = shape
    for name in names:
        point = manipulate_point(point, name, (h, w))
        if name == "rotate90":
            h, w = w, h
    return point
