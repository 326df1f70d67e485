"""SGLT tensor file writer/reader (adapter-side implementation).

Same wire format the toolkit consumes, all little-endian:
magic "SGLT", u32 version=1, u32 H, u32 W, u32 C, then C*H*W float32
values in planar class-major order. Implemented here independently so the
adapter stays decoupled from the toolkit package.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"SGLT"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


def write_sglt(path: str | Path, logits: np.ndarray) -> None:
    if logits.ndim != 3:
        raise ValueError(f"logits must be (C, H, W), got shape {logits.shape}")
    c, h, w = logits.shape
    payload = _HEADER.pack(MAGIC, VERSION, h, w, c)
    payload += np.ascontiguousarray(logits, dtype="<f4").tobytes()
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_sglt(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, h, w, c = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise ValueError(f"{path}: not an SGLT v{VERSION} file")
    expected = _HEADER.size + 4 * c * h * w
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(c, h, w).copy()
