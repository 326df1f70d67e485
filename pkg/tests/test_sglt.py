import struct

import numpy as np
import pytest

from mdseg.errors import ParseError
from mdseg.sglt import SGLT_MAGIC, read_sglt, write_sglt


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    logits = rng.standard_normal((5, 7, 3)).astype(np.float32)
    path = tmp_path / "t.sglt"
    write_sglt(path, logits)
    back = read_sglt(path)
    assert back.dtype == np.float32
    assert np.array_equal(back.view(np.uint32), logits.view(np.uint32))  # bitwise


def test_header_layout(tmp_path):
    logits = np.zeros((2, 3, 4), dtype=np.float32)
    path = tmp_path / "t.sglt"
    write_sglt(path, logits)
    raw = path.read_bytes()
    magic, version, h, w, c = struct.unpack_from("<4sIIII", raw)
    assert magic == SGLT_MAGIC
    assert (version, h, w, c) == (1, 3, 4, 2)
    assert len(raw) == 20 + 4 * 2 * 3 * 4


def test_planar_class_major_order(tmp_path):
    logits = np.arange(2 * 2 * 2, dtype=np.float32).reshape(2, 2, 2)
    path = tmp_path / "t.sglt"
    write_sglt(path, logits)
    floats = np.frombuffer(path.read_bytes()[20:], dtype="<f4")
    assert floats.tolist() == [0, 1, 2, 3, 4, 5, 6, 7]  # plane 0 rows, then plane 1


def test_bad_magic(tmp_path):
    p = tmp_path / "x.sglt"
    p.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ParseError, match="magic"):
        read_sglt(p)


def test_bad_version(tmp_path):
    p = tmp_path / "x.sglt"
    p.write_bytes(struct.pack("<4sIIII", b"SGLT", 9, 1, 1, 1) + b"\x00" * 4)
    with pytest.raises(ParseError, match="version"):
        read_sglt(p)


def test_truncated_payload(tmp_path):
    p = tmp_path / "x.sglt"
    p.write_bytes(struct.pack("<4sIIII", b"SGLT", 1, 2, 2, 1) + b"\x00" * 7)
    with pytest.raises(ParseError, match="payload"):
        read_sglt(p)


def test_truncated_header(tmp_path):
    p = tmp_path / "x.sglt"
    p.write_bytes(b"SG")
    with pytest.raises(ParseError, match="truncated"):
        read_sglt(p)


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        read_sglt(tmp_path / "absent.sglt")


def test_write_rejects_bad_rank():
    with pytest.raises(ValueError):
        write_sglt("/tmp/never.sglt", np.zeros((2, 2), dtype=np.float32))
