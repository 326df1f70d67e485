"""Deterministic fake predictors for testing the pipeline without a model.

A model here is any callable ``(image_path, (w, h), flip) -> (C, H, W)
float32``. Three stubs are provided:

* ``constant``: identical scores everywhere, so the fused mask is all
  class 0 under lowest-index tie-breaking.
* ``gt-leak``: one-hot scores copied from a ground-truth mask directory,
  which drives any correctly wired pipeline to a perfect score.
* ``checkerboard``: a fixed two-class grid pattern at the requested size,
  handy for hand-checkable fusion arithmetic.

Masks are resampled nearest-neighbor with half-pixel centers
(``floor((i + 0.5) * in/out)``, clamped), matching the toolkit's
convention for label images.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def _nearest_resize(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = arr.shape
    ys = np.minimum((np.arange(out_h) + 0.5) * (h / out_h), h - 1).astype(np.int64)
    xs = np.minimum((np.arange(out_w) + 0.5) * (w / out_w), w - 1).astype(np.int64)
    return arr[ys][:, xs]


class ConstantStub:
    """Same logits for every pixel and every request."""

    def __init__(self, classes: int = 256, value: float = 0.0):
        self.classes = classes
        self.value = value

    def __call__(self, image_path, scale, flip):
        w, h = scale
        return np.full((self.classes, h, w), self.value, dtype=np.float32)


class GtLeakStub:
    """One-hot logits read from a mask with the image's filename stem."""

    def __init__(self, gt_dir: str | Path, classes: int = 256, margin: float = 10.0):
        self.gt_dir = Path(gt_dir)
        self.classes = classes
        self.margin = margin

    def __call__(self, image_path, scale, flip):
        mask_path = self.gt_dir / (Path(image_path).stem + ".png")
        if not mask_path.exists():
            raise FileNotFoundError(f"no ground-truth mask at {mask_path}")
        with Image.open(mask_path) as im:
            if im.mode not in ("L", "P"):
                raise ValueError(f"{mask_path}: expected 8-bit mask, got mode {im.mode!r}")
            mask = np.asarray(im, dtype=np.uint8)
        w, h = scale
        mask = _nearest_resize(mask, w, h)
        if flip:
            mask = mask[:, ::-1]
        if int(mask.max()) >= self.classes:
            raise ValueError(
                f"{mask_path}: class {int(mask.max())} exceeds {self.classes} planes"
            )
        logits = np.zeros((self.classes, h, w), dtype=np.float32)
        for c in np.unique(mask):
            logits[int(c)][mask == c] = self.margin
        return logits


class CheckerboardStub:
    """Alternating two-class pattern generated at the requested size."""

    def __init__(
        self,
        classes: int = 256,
        cell: int = 1,
        class_a: int = 0,
        class_b: int = 1,
        margin: float = 4.0,
    ):
        if not (0 <= class_a < classes and 0 <= class_b < classes):
            raise ValueError("checkerboard classes out of range")
        self.classes = classes
        self.cell = max(1, cell)
        self.class_a = class_a
        self.class_b = class_b
        self.margin = margin

    def __call__(self, image_path, scale, flip):
        w, h = scale
        ys, xs = np.mgrid[0:h, 0:w]
        odd = ((ys // self.cell + xs // self.cell) % 2).astype(bool)
        if flip:
            odd = odd[:, ::-1]
        logits = np.zeros((self.classes, h, w), dtype=np.float32)
        logits[self.class_a][~odd] = self.margin
        logits[self.class_b][odd] = self.margin
        return logits


STUB_MODES = ("constant", "gt-leak", "checkerboard")


def make_stub(mode: str, classes: int, gt_dir=None, margin: float = 10.0, cell: int = 1):
    if mode == "constant":
        return ConstantStub(classes)
    if mode == "gt-leak":
        if gt_dir is None:
            raise ValueError("gt-leak mode needs --gt-dir")
        return GtLeakStub(gt_dir, classes, margin)
    if mode == "checkerboard":
        return CheckerboardStub(classes, cell=cell, margin=margin)
    raise ValueError(f"unknown stub mode {mode!r}; choose from {STUB_MODES}")
