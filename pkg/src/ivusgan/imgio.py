"""Tiny deterministic image writers: binary PGM (P5) and grayscale PNG.

PGM is the on-disk dataset format (condition images and label maps); PNG is
only used embedded in SVG overlays.  Both writers are byte-deterministic for
identical inputs, which the dataset/report idempotence contracts rely on.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np


def write_pgm(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"PGM needs a 2-d array, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"PGM writer expects uint8, got {img.dtype}")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header = magic, width, height, maxval; '#' comments allowed between tokens
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = tokens
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    raw = data[pos : pos + w * h]
    if len(raw) != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w).copy()


def to_uint8(img01: np.ndarray) -> np.ndarray:
    """Map floats in [0, 1] to uint8 with round-half-up."""
    return np.floor(np.clip(img01, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def encode_png_gray(img: np.ndarray) -> bytes:
    """8-bit grayscale PNG bytes (filter 0 on every scanline, zlib level 9)."""
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError(f"need a 2-d uint8 array, got {img.shape} {img.dtype}")
    h, w = img.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    scanlines = b"".join(b"\x00" + img[r].tobytes() for r in range(h))
    return (
        b"\x89PNG\r\n\x1a\n"
        + _png_chunk(b"IHDR", ihdr)
        + _png_chunk(b"IDAT", zlib.compress(scanlines, 9))
        + _png_chunk(b"IEND", b"")
    )
