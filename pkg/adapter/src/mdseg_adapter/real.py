"""Optional bridge to a real PyTorch segmentation checkpoint.

Loads a TorchScript module that maps a (1, 3, H, W) float tensor of
RGB values in [0, 1] to (1, C, H, W) logits. Intended for exported
transformer-backbone segmentation checkpoints; exercised as a smoke test
only, since the stub modes cover every pipeline contract. Torch is
imported lazily so the stub paths work without a deep-learning runtime.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


class RealModel:
    def __init__(self, checkpoint: str | Path, device: str = "cpu", classes: int = 256,
                 interp: str = "bilinear"):
        try:
            import torch
        except ImportError:
            raise RuntimeError(
                "PyTorch is not installed; run with --stub for model-free serving"
            ) from None
        self._torch = torch
        self.device = device
        self.classes = classes
        if interp not in ("bilinear", "nearest"):
            raise ValueError(f"unknown interpolation {interp!r}")
        self.interp = interp
        self.module = torch.jit.load(str(checkpoint), map_location=device)
        self.module.eval()

    def __call__(self, image_path, scale, flip):
        torch = self._torch
        w, h = scale
        with Image.open(image_path) as im:
            resample = Image.BILINEAR if self.interp == "bilinear" else Image.NEAREST
            rgb = im.convert("RGB").resize((w, h), resample)
        arr = np.asarray(rgb, dtype=np.float32) / 255.0
        if flip:
            arr = arr[:, ::-1].copy()
        batch = torch.from_numpy(arr.transpose(2, 0, 1))[None].to(self.device)
        with torch.no_grad():
            out = self.module(batch)
        logits = out[0].cpu().numpy().astype(np.float32)
        if logits.ndim != 3 or logits.shape[0] != self.classes:
            raise RuntimeError(
                f"checkpoint produced shape {logits.shape}, expected ({self.classes}, H, W)"
            )
        return logits
