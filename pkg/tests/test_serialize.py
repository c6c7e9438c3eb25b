import io

import numpy as np
import pytest

from ivusgan.rng import Rng
from ivusgan.serialize import (
    SerializationError,
    load_tensor,
    read_checkpoint,
    read_tensor,
    save_tensor,
    write_checkpoint,
    write_tensor,
)


def test_tensor_roundtrip_bitwise(tmp_path):
    for dtype in (np.float32, np.float64):
        arr = Rng(1).normal((3, 4, 5)).astype(dtype)
        path = tmp_path / f"t_{dtype.__name__}.ivt"
        save_tensor(path, arr)
        back = load_tensor(path)
        assert back.dtype == dtype
        assert back.shape == arr.shape
        assert np.array_equal(back.view(np.uint8), arr.view(np.uint8))  # bitwise


def test_tensor_header_layout():
    buf = io.BytesIO()
    write_tensor(buf, np.zeros((2, 3), dtype=np.float32))
    raw = buf.getvalue()
    assert raw[:4] == b"IVT1"
    assert raw[4] == 2  # rank
    assert int.from_bytes(raw[5:9], "little") == 2
    assert int.from_bytes(raw[9:13], "little") == 3
    assert raw[13] == 0  # float32 code
    assert len(raw) == 14 + 2 * 3 * 4


def test_scalar_tensor_roundtrip():
    buf = io.BytesIO()
    write_tensor(buf, np.asarray(3.5, dtype=np.float64))
    buf.seek(0)
    back = read_tensor(buf)
    assert back.shape == () and back == 3.5


def test_truncated_tensor_raises():
    buf = io.BytesIO()
    write_tensor(buf, np.ones((4, 4), dtype=np.float32))
    raw = buf.getvalue()[:-7]
    with pytest.raises(SerializationError, match="truncated"):
        read_tensor(io.BytesIO(raw))


def test_bad_magic_raises():
    with pytest.raises(SerializationError, match="magic"):
        read_tensor(io.BytesIO(b"NOPE" + b"\x00" * 32))


def test_checkpoint_roundtrip(tmp_path):
    cfg = {"generator": {"variant": "unet", "depth": 3}, "version": 1}
    arrays = {
        "gen.enc0.weight": Rng(2).normal((4, 1, 4, 4)).astype(np.float32),
        "gen.enc0.bias": np.zeros(4, dtype=np.float32),
        "disc.head.weight": Rng(3).normal((1, 8, 3, 3)).astype(np.float32),
    }
    path = tmp_path / "ck.ivck"
    write_checkpoint(path, cfg, arrays)
    cfg2, arrays2 = read_checkpoint(path)
    assert cfg2 == cfg
    assert list(arrays2) == list(arrays)  # order preserved
    for k in arrays:
        assert np.array_equal(arrays[k], arrays2[k])


def test_checkpoint_rewrite_is_byte_identical(tmp_path):
    cfg = {"b": 2, "a": 1}
    arrays = {"w": np.ones((2, 2), dtype=np.float32)}
    p1, p2 = tmp_path / "a.ivck", tmp_path / "b.ivck"
    write_checkpoint(p1, cfg, arrays)
    write_checkpoint(p2, dict(reversed(cfg.items())), arrays)  # key order irrelevant
    assert p1.read_bytes() == p2.read_bytes()


def test_truncated_checkpoint_raises(tmp_path):
    path = tmp_path / "ck.ivck"
    write_checkpoint(path, {"x": 1}, {"w": np.ones(3, dtype=np.float32)})
    clipped = path.read_bytes()[:-5]
    path.write_bytes(clipped)
    with pytest.raises(SerializationError, match="truncated"):
        read_checkpoint(path)


def test_checkpoint_version_guard(tmp_path):
    path = tmp_path / "ck.ivck"
    write_checkpoint(path, {}, {})
    raw = bytearray(path.read_bytes())
    raw[4] = 99  # bump version field
    path.write_bytes(bytes(raw))
    with pytest.raises(SerializationError, match="version 99"):
        read_checkpoint(path)
