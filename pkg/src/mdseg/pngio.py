"""PNG / file I/O helpers.

Masks are single-channel 8-bit PNGs whose pixel values are class ids.
All writes are atomic: content goes to a temporary file in the target
directory and is renamed into place, so readers never observe partial
files and reruns are idempotent.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
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


def read_mask(path: str | Path) -> np.ndarray:
    """Load a class-id mask as a (H, W) uint8 array."""
    with Image.open(path) as im:
        if im.mode not in ("L", "P"):
            raise DataError(f"{path}: expected 8-bit single-channel mask, got mode {im.mode!r}")
        return np.asarray(im, dtype=np.uint8)


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    if mask.ndim != 2:
        raise DataError(f"mask must be 2-D, got shape {mask.shape}")
    if mask.dtype != np.uint8:
        if mask.max(initial=0) > 255 or mask.min(initial=0) < 0:
            raise DataError(f"mask values exceed 8-bit range: max={mask.max()}")
        mask = mask.astype(np.uint8)
    import io

    buf = io.BytesIO()
    # low compression: mask remap throughput matters more than file size
    Image.fromarray(mask, mode="L").save(buf, format="PNG", compress_level=1)
    atomic_write_bytes(path, buf.getvalue())


def read_image(path: str | Path) -> np.ndarray:
    """Load an image as a (H, W, 3) uint8 RGB array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_image(path: str | Path, img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"image must be (H, W, 3), got shape {img.shape}")
    import io

    buf = io.BytesIO()
    Image.fromarray(img.astype(np.uint8), mode="RGB").save(buf, format="PNG", compress_level=1)
    atomic_write_bytes(path, buf.getvalue())


def image_size(path: str | Path) -> tuple[int, int]:
    """(width, height) from the file header without decoding pixels."""
    with Image.open(path) as im:
        return im.size
