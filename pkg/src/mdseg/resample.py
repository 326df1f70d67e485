"""Image and tensor resampling kernels.

All geometric resampling in the toolkit goes through these kernels so
that results are bit-reproducible and independent of any image library's
filter choices. Conventions, fixed for cross-implementation agreement:

* Coordinates use half-pixel centers: output pixel ``i`` samples source
  coordinate ``(i + 0.5) * in/out - 0.5``, with edge clamping.
* Bilinear blending uses the lerp form ``a + f * (b - a)``, which
  preserves constant planes and identity resizes bit-exactly.
* Nearest-neighbor picks ``floor((i + 0.5) * in/out)`` clamped to the
  valid range; it only ever copies source values.

Each kernel also has a window variant that evaluates just a rectangle of
the virtual output. Because every output pixel is an independent function
of the source, a window result is bit-identical to slicing the full
resize; pipelines that crop right after resizing use this to skip the
discarded pixels.
"""

from __future__ import annotations

import numpy as np


def fit_size(src_w: int, src_h: int, box_w: float, box_h: float) -> tuple[int, int]:
    """Keep-aspect fit of a (src_w, src_h) image into a (box_w, box_h) box.

    Scales by min(box_w/src_w, box_h/src_h), so one output edge touches
    the box; upscaling happens when the box is larger than the source.
    Edges round as floor(x + 0.5) and never collapse below 1 pixel.
    """
    if src_w <= 0 or src_h <= 0:
        raise ValueError(f"source size must be positive, got {src_w}x{src_h}")
    if box_w <= 0 or box_h <= 0:
        raise ValueError(f"target box must be positive, got {box_w}x{box_h}")
    s = min(box_w / src_w, box_h / src_h)
    return max(1, int(src_w * s + 0.5)), max(1, int(src_h * s + 0.5))


def _axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Clamped (lo index, hi index, fraction) for one bilinear axis."""
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    lo = np.floor(src)
    frac = src - lo
    lo = lo.astype(np.int64)
    hi = np.clip(lo + 1, 0, n_in - 1)
    lo = np.clip(lo, 0, n_in - 1)
    return lo, hi, frac


def _check_args(arr: np.ndarray, out_w: int, out_h: int) -> None:
    if out_w <= 0 or out_h <= 0:
        raise ValueError(f"output size must be positive, got {out_w}x{out_h}")
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected 2-D or 3-D array, got shape {arr.shape}")


def _bilinear(arr, x0, x1, fx, y0, y1, fy):
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float32)
    fx = fx.astype(arr.dtype)[None, :, None]
    fy = fy.astype(arr.dtype)[:, None, None]
    r0 = arr[y0]
    r1 = arr[y1]
    top = r0[:, x0] + fx * (r0[:, x1] - r0[:, x0])
    bot = r1[:, x0] + fx * (r1[:, x1] - r1[:, x0])
    out = top + fy * (bot - top)
    return out[:, :, 0] if squeeze else out


def resize_bilinear(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize of a (H, W) or (H, W, C) float array.

    Returns an array of the input's floating dtype (integer inputs are
    promoted to float32). Identity sizes return an exact copy.
    """
    _check_args(arr, out_w, out_h)
    h, w = arr.shape[:2]
    x0, x1, fx = _axis_coords(w, out_w)
    y0, y1, fy = _axis_coords(h, out_h)
    return _bilinear(arr, x0, x1, fx, y0, y1, fy)


def resize_bilinear_window(
    arr: np.ndarray,
    out_w: int,
    out_h: int,
    win_x: int,
    win_y: int,
    win_w: int,
    win_h: int,
) -> np.ndarray:
    """The window [win_x:+win_w, win_y:+win_h] of a virtual (out_w, out_h) resize.

    Bit-identical to ``resize_bilinear(arr, out_w, out_h)[win_y:.., win_x:..]``
    at a cost proportional to the window, not the full output.
    """
    _check_args(arr, out_w, out_h)
    if not (0 <= win_x and win_x + win_w <= out_w and 0 <= win_y and win_y + win_h <= out_h):
        raise ValueError(
            f"window {win_w}x{win_h}+{win_x}+{win_y} outside output {out_w}x{out_h}"
        )
    h, w = arr.shape[:2]
    x0, x1, fx = _axis_coords(w, out_w)
    y0, y1, fy = _axis_coords(h, out_h)
    sl_x = slice(win_x, win_x + win_w)
    sl_y = slice(win_y, win_y + win_h)
    return _bilinear(arr, x0[sl_x], x1[sl_x], fx[sl_x], y0[sl_y], y1[sl_y], fy[sl_y])


def _nearest_axis(n_in: int, n_out: int) -> np.ndarray:
    return np.minimum(
        (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out), n_in - 1
    ).astype(np.int64)


def resize_nearest(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Nearest-neighbor resize of a (H, W) or (H, W, C) array, dtype preserved."""
    _check_args(arr, out_w, out_h)
    h, w = arr.shape[:2]
    return arr[_nearest_axis(h, out_h)][:, _nearest_axis(w, out_w)].copy()


def resize_nearest_window(
    arr: np.ndarray,
    out_w: int,
    out_h: int,
    win_x: int,
    win_y: int,
    win_w: int,
    win_h: int,
) -> np.ndarray:
    """Window variant of resize_nearest; see resize_bilinear_window."""
    _check_args(arr, out_w, out_h)
    h, w = arr.shape[:2]
    ys = _nearest_axis(h, out_h)[win_y : win_y + win_h]
    xs = _nearest_axis(w, out_w)[win_x : win_x + win_w]
    return arr[ys][:, xs].copy()


def resize_image_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize of an 8-bit image; rounds half-to-even back to uint8."""
    out = resize_bilinear(img.astype(np.float32), out_w, out_h)
    np.clip(out, 0.0, 255.0, out=out)
    return np.rint(out).astype(np.uint8)


def resize_image_bilinear_window(
    img: np.ndarray, out_w: int, out_h: int, win_x: int, win_y: int, win_w: int, win_h: int
) -> np.ndarray:
    """Window variant of resize_image_bilinear, bit-identical to slicing it."""
    out = resize_bilinear_window(
        img.astype(np.float32), out_w, out_h, win_x, win_y, win_w, win_h
    )
    np.clip(out, 0.0, 255.0, out=out)
    return np.rint(out).astype(np.uint8)
