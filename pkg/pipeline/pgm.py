"""
Binary 16-bit PGM (P5, maxval 65535, big-endian samples).

Encoding maps the image's min..max affinely onto 0..65535 and rounds;
a constant image encodes as all zeros. Decoding returns values in [0, 1].
"""

from pathlib import Path
from typing import Tuple, Union

import numpy as np

from errors import ContractViolation, PGMParseError, ShapeMismatch

MAXVAL = 65535
PathLike = Union[str, Path]


def quantize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch("encode_pgm", x.shape, ("H", "W"))
    if x.size == 0:
        raise ContractViolation("cannot encode an empty image")
    if not np.all(np.isfinite(x)):
        raise ContractViolation("cannot encode a non-finite image")
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return np.zeros(x.shape, dtype=np.uint16)
    return np.rint((x - lo) / (hi - lo) * MAXVAL).astype(np.uint16)


def encode_pgm_bytes(x) -> bytes:
    q = quantize(x)
    h, w = q.shape
    header = f"P5\n{w} {h}\n{MAXVAL}\n".encode("ascii")
    return header + q.astype(">u2").tobytes()


def encode_pgm(x, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_pgm_bytes(x))
    return path


def _next_token(data: bytes, pos: int) -> Tuple[bytes, int]:
    n = len(data)
    while pos < n:
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PGMParseError("unexpected end of header", start)
    return data[start:pos], pos


def _header_int(data: bytes, pos: int, field: str) -> Tuple[int, int]:
    token, end = _next_token(data, pos)
    if not token.isdigit():
        raise PGMParseError(f"expected {field}, found {token!r}", end - len(token))
    return int(token), end


def decode_pgm_bytes(data: bytes) -> np.ndarray:
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise PGMParseError(f"bad magic {magic!r}", 0)
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise PGMParseError(f"bad dimensions {width}x{height}", pos)
    if not 0 < maxval <= MAXVAL:
        raise PGMParseError(f"maxval {maxval} outside 1..{MAXVAL}", pos)
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PGMParseError("missing whitespace after maxval", pos)
    pos += 1
    sample = ">u2" if maxval > 255 else "u1"
    expected = width * height * np.dtype(sample).itemsize
    payload = data[pos:]
    if len(payload) != expected:
        raise PGMParseError(f"payload holds {len(payload)} bytes, expected {expected}", pos)
    values = np.frombuffer(payload, dtype=sample).reshape(height, width)
    return values.astype(np.float64) / maxval


def decode_pgm(path: PathLike) -> np.ndarray:
    return decode_pgm_bytes(Path(path).read_bytes())
