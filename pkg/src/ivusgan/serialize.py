"""Binary tensor and checkpoint formats.

Tensor blob (magic ``IVT1``), all integers little-endian::

    bytes 0..3   magic "IVT1"
    byte  4      rank (uint8)
    next         rank x uint32 extents
    next  1      dtype code (uint8): 0 = float32, 1 = float64
    rest         raw values, C order, little-endian

Checkpoint file (magic ``IVCK``)::

    bytes 0..3   magic "IVCK"
    uint32       format version (currently 1)
    uint32       config length, then that many bytes of canonical JSON
    uint32       tensor count, then per tensor:
                     uint16 name length, name (utf-8), IVT1 blob

The JSON config echo is canonical (sorted keys, compact separators) so a
rewrite of the same checkpoint is byte-identical.
"""

from __future__ import annotations

import json
import struct

import numpy as np

TENSOR_MAGIC = b"IVT1"
CHECKPOINT_MAGIC = b"IVCK"
CHECKPOINT_VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_FOR_KIND = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class SerializationError(ValueError):
    pass


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise SerializationError(f"truncated file: expected {n} bytes for {what}, got {len(buf)}")
    return buf


def write_tensor(fh, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    base = np.dtype(arr.dtype)
    if base not in _CODE_FOR_KIND:
        raise SerializationError(f"unsupported dtype {arr.dtype} (float32/float64 only)")
    if arr.ndim > 255:
        raise SerializationError(f"rank {arr.ndim} exceeds format limit 255")
    fh.write(TENSOR_MAGIC)
    fh.write(struct.pack("<B", arr.ndim))
    for ext in arr.shape:
        fh.write(struct.pack("<I", ext))
    code = _CODE_FOR_KIND[base]
    fh.write(struct.pack("<B", code))
    fh.write(np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes())


def read_tensor(fh) -> np.ndarray:
    magic = _read_exact(fh, 4, "tensor magic")
    if magic != TENSOR_MAGIC:
        raise SerializationError(f"bad tensor magic {magic!r}, expected {TENSOR_MAGIC!r}")
    (rank,) = struct.unpack("<B", _read_exact(fh, 1, "rank"))
    shape = tuple(
        struct.unpack("<I", _read_exact(fh, 4, f"extent {i}"))[0] for i in range(rank)
    )
    (code,) = struct.unpack("<B", _read_exact(fh, 1, "dtype code"))
    if code not in _DTYPE_CODES:
        raise SerializationError(f"unknown dtype code {code}")
    dtype = _DTYPE_CODES[code]
    count = int(np.prod(shape)) if shape else 1
    raw = _read_exact(fh, count * dtype.itemsize, "tensor data")
    arr = np.frombuffer(raw, dtype=dtype).reshape(shape)
    return arr.astype(arr.dtype.newbyteorder("="))


def save_tensor(path, arr: np.ndarray) -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, arr)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor(fh)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_checkpoint(path, config: dict, named_arrays) -> None:
    """``named_arrays``: iterable of (name, ndarray), order preserved."""
    items = list(named_arrays.items()) if isinstance(named_arrays, dict) else list(named_arrays)
    blob = canonical_json(config).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(items)))
        for name, arr in items:
            enc = name.encode("utf-8")
            if len(enc) > 0xFFFF:
                raise SerializationError(f"tensor name too long: {name[:40]}...")
            fh.write(struct.pack("<H", len(enc)))
            fh.write(enc)
            write_tensor(fh, arr)


def read_checkpoint(path):
    """Return (config dict, {name: ndarray}) or raise SerializationError."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "checkpoint magic")
        if magic != CHECKPOINT_MAGIC:
            raise SerializationError(f"bad checkpoint magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise SerializationError(
                f"unsupported checkpoint version {version} (this build reads {CHECKPOINT_VERSION})"
            )
        (cfg_len,) = struct.unpack("<I", _read_exact(fh, 4, "config length"))
        try:
            config = json.loads(_read_exact(fh, cfg_len, "config").decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise SerializationError(f"corrupt config block: {exc}") from None
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "tensor count"))
        arrays = {}
        for i in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, f"name length {i}"))
            name = _read_exact(fh, name_len, f"name {i}").decode("utf-8")
            if name in arrays:
                raise SerializationError(f"duplicate tensor name {name!r}")
            arrays[name] = read_tensor(fh)
        return config, arrays
