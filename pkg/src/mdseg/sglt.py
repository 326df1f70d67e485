"""SGLT: the binary interchange file for per-pixel class score tensors.

Layout, all little-endian:

    bytes 0..3   magic "SGLT"
    u32          version (currently 1)
    u32          H, then W, then C
    f32 x C*H*W  scores, planar class-major order (plane 0 first,
                 each plane row-major)

Readers validate magic, version, and exact payload length, so truncated
or foreign files fail loudly instead of producing shifted tensors.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ParseError
from .pngio import atomic_write_bytes

SGLT_MAGIC = b"SGLT"
SGLT_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


def write_sglt(path: str | Path, logits: np.ndarray) -> None:
    """Write a (C, H, W) float32 tensor; lossless round-trip guaranteed."""
    if logits.ndim != 3:
        raise ValueError(f"logits must be (C, H, W), got shape {logits.shape}")
    c, h, w = logits.shape
    header = _HEADER.pack(SGLT_MAGIC, SGLT_VERSION, h, w, c)
    payload = np.ascontiguousarray(logits, dtype="<f4").tobytes()
    atomic_write_bytes(path, header + payload)


def read_sglt(path: str | Path) -> np.ndarray:
    """Read an SGLT file back into a (C, H, W) float32 array.

    Raises:
        ParseError: bad magic, unsupported version, or size mismatch.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from None
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, h, w, c = _HEADER.unpack_from(raw)
    if magic != SGLT_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if version != SGLT_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 4 * c * h * w
    if len(raw) != expected:
        raise ParseError(
            f"{path}: payload is {len(raw) - _HEADER.size} bytes, "
            f"expected {expected - _HEADER.size} for {c}x{h}x{w} float32"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return data.reshape(c, h, w).astype(np.float32, copy=True)
