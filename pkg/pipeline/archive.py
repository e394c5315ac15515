"""
Tensor archive: checkpoints and noise files.

Layout::

    b"OSNA" | u32 little-endian manifest length | manifest (UTF-8) | payload

The manifest is line oriented::

    osn-archive 1
    attr <key> <json value>
    tensor <name> <dtype> <shape> <offset> <nbytes>

``dtype`` is one of f32, f64, i64, u8 or bool (one byte, 0 or 1).
``shape`` is comma separated (``-`` for a 0-d tensor); payload bytes are
the little-endian elements of each tensor, concatenated in manifest
order with no padding.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np

from errors import ContractViolation, CorruptManifestError, OffsetMismatchError, VersionMismatchError
from nets.params import ParameterSet
from noise_synthesis.models import NoiseMethod, SaliencyNoise

logger = logging.getLogger(__name__)

MAGIC = b"OSNA"
FORMAT_VERSION = 1
HEADER = "osn-archive"
DTYPES = {
    "f32": np.dtype("<f4"),
    "f64": np.dtype("<f8"),
    "i64": np.dtype("<i8"),
    "u8": np.dtype("u1"),
    "bool": np.dtype("?"),
}
PathLike = Union[str, Path]


@dataclass
class Archive:
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)
    attrs: Dict[str, Any] = field(default_factory=dict)


def _dtype_code(array: np.ndarray) -> str:
    for code, dtype in DTYPES.items():
        if array.dtype.kind == dtype.kind and array.dtype.itemsize == dtype.itemsize:
            return code
    raise ContractViolation(f"unsupported archive dtype {array.dtype}")


def _check_name(name: str, what: str) -> None:
    if not name or any(ch.isspace() for ch in name):
        raise ContractViolation(f"{what} name {name!r} must be nonempty without whitespace")


def archive_bytes(tensors: Mapping[str, np.ndarray], attrs: Optional[Mapping[str, Any]] = None) -> bytes:
    lines = [f"{HEADER} {FORMAT_VERSION}"]
    for key, value in (attrs or {}).items():
        _check_name(key, "attribute")
        lines.append(f"attr {key} {json.dumps(value, sort_keys=True)}")
    chunks = []
    offset = 0
    for name, value in tensors.items():
        _check_name(name, "tensor")
        array = np.asarray(value)
        code = _dtype_code(array)
        raw = np.ascontiguousarray(array).astype(DTYPES[code], copy=False).tobytes()
        shape = ",".join(str(d) for d in array.shape) or "-"
        lines.append(f"tensor {name} {code} {shape} {offset} {len(raw)}")
        chunks.append(raw)
        offset += len(raw)
    manifest = ("\n".join(lines) + "\n").encode("utf-8")
    return MAGIC + struct.pack("<I", len(manifest)) + manifest + b"".join(chunks)


def save_archive(tensors: Mapping[str, np.ndarray], path: PathLike,
                 attrs: Optional[Mapping[str, Any]] = None) -> Path:
    """Write named tensors; names are unique by construction of the mapping"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(archive_bytes(tensors, attrs))
    logger.debug(f"Saved {len(tensors)} tensors to {path}")
    return path


def _parse_shape(token: str):
    if token == "-":
        return ()
    return tuple(int(d) for d in token.split(","))


def parse_archive(data: bytes) -> Archive:
    if len(data) < 8 or data[:4] != MAGIC:
        raise CorruptManifestError("not a tensor archive (bad magic)")
    (length,) = struct.unpack("<I", data[4:8])
    if 8 + length > len(data):
        raise CorruptManifestError(f"manifest length {length} exceeds file size {len(data)}")
    try:
        lines = data[8:8 + length].decode("utf-8").splitlines()
    except UnicodeDecodeError as e:
        raise CorruptManifestError(f"manifest is not UTF-8: {e}") from None
    payload = data[8 + length:]

    if not lines or not lines[0].startswith(HEADER + " "):
        raise CorruptManifestError("missing archive header line")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise CorruptManifestError(f"bad header line {lines[0]!r}") from None
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"archive version {version}, this build reads version {FORMAT_VERSION}")

    archive = Archive()
    expected_offset = 0
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split(" ", 2) if line.startswith("attr ") else line.split()
        try:
            if parts[0] == "attr":
                archive.attrs[parts[1]] = json.loads(parts[2])
                continue
            if parts[0] != "tensor" or len(parts) != 6:
                raise ValueError(line)
            _, name, code, shape_token, offset, nbytes = parts
            dtype = DTYPES[code]
            shape = _parse_shape(shape_token)
            offset, nbytes = int(offset), int(nbytes)
        except (IndexError, KeyError, ValueError):
            raise CorruptManifestError(f"malformed manifest line {number}: {line!r}") from None
        if name in archive.tensors:
            raise CorruptManifestError(f"duplicate tensor {name!r} on manifest line {number}")
        if offset != expected_offset or nbytes != int(np.prod(shape, dtype=np.int64)) * dtype.itemsize:
            raise OffsetMismatchError(f"tensor {name!r} at offset {offset} (+{nbytes}), expected {expected_offset}")
        if offset + nbytes > len(payload):
            raise OffsetMismatchError(f"tensor {name!r} ends at {offset + nbytes}, payload holds {len(payload)} bytes")
        archive.tensors[name] = np.frombuffer(payload, dtype=dtype, count=nbytes // dtype.itemsize,
                                              offset=offset).reshape(shape).copy()
        expected_offset = offset + nbytes
    if expected_offset != len(payload):
        raise OffsetMismatchError(f"payload holds {len(payload)} bytes, manifest accounts for {expected_offset}")
    return archive


def read_archive(path: PathLike) -> Archive:
    return parse_archive(Path(path).read_bytes())


def load_archive(path: PathLike) -> Dict[str, np.ndarray]:
    return read_archive(path).tensors


def save_checkpoint(params: ParameterSet, path: PathLike, kind: str, attrs: Optional[Mapping[str, Any]] = None) -> Path:
    return save_archive(params.to_named_arrays(), path, {"kind": kind, **(attrs or {})})


def load_checkpoint(path: PathLike, params: ParameterSet, kind: str) -> ParameterSet:
    """Load into a freshly built ParameterSet of the expected architecture"""
    archive = read_archive(path)
    found = archive.attrs.get("kind")
    if found != kind:
        raise ContractViolation(f"{path} holds a {found!r} checkpoint, expected {kind!r}")
    params.load_named_arrays(archive.tensors)
    return params


def save_noise(noise: SaliencyNoise, path: PathLike) -> Path:
    attrs = {
        "kind": "noise",
        "method": noise.method.value,
        "steps_k": noise.steps_k,
        "source_id": noise.source_id,
        "source_class": noise.source_class,
        "seed": noise.seed,
        "standardized": noise.standardized,
    }
    tensors = {
        "noise/values": noise.values,
        "noise/mu": np.float64(noise.mu),
        "noise/sigma": np.float64(noise.sigma),
    }
    return save_archive(tensors, path, attrs)


def load_noise(path: PathLike) -> SaliencyNoise:
    archive = read_archive(path)
    if archive.attrs.get("kind") != "noise":
        raise ContractViolation(f"{path} does not hold saliency noise")
    a, t = archive.attrs, archive.tensors
    return SaliencyNoise(
        values=t["noise/values"],
        method=NoiseMethod(a["method"]),
        steps_k=int(a["steps_k"]),
        source_id=a["source_id"],
        source_class=int(a["source_class"]),
        mu=float(t["noise/mu"]),
        sigma=float(t["noise/sigma"]),
        seed=int(a["seed"]),
        standardized=bool(a["standardized"]),
    )
