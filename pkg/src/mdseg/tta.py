"""Test-time augmentation: multi-scale + horizontal-flip score fusion.

The segmentation model itself lives behind a *predictor*: anything that
accepts (image path, requested scale, flip flag) and returns a per-pixel
class score tensor. For each configured ratio the image is predicted at
its keep-aspect fit into ``base_scale * ratio`` (and additionally
mirrored when flip is enabled). Mirrored scores are unmirrored, every
tensor is rescaled bilinearly to the original image size, the stack is
averaged, and the argmax becomes the output mask.

Fusion averages raw scores by default (sums in float64, divides, casts
back to float32, so a single-entry or all-equal stack reproduces its
input bit-exactly). ``prob-mean`` mode averages per-pixel softmax
probabilities instead. Argmax ties break to the lowest class index.

External predictor processes speak a line protocol on stdin/stdout:
request ``{"id", "image_path", "scale": [w, h], "flip"}``, reply
``{"id", "logit_path"}`` naming an SGLT file, or ``{"id", "error"}``.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, PredictorError
from .label_space import UNIFIED_SPACE_NAME, MaskImage
from .pngio import image_size
from .resample import fit_size, resize_bilinear
from .sglt import read_sglt

DEFAULT_RATIOS = (0.5, 0.75, 1.0, 1.25, 1.5, 1.75)


@dataclass(frozen=True)
class LogitMap:
    """Planar (C, H, W) float32 per-pixel class scores."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"logits must be (C, H, W), got shape {self.data.shape}")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))

    @property
    def classes(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class TtaConfig:
    base_scale: tuple[int, int] = (2048, 1024)
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    flip: bool = True
    fuse: str = "logit-mean"  # or "prob-mean"

    def __post_init__(self):
        if not self.ratios or any(r <= 0 for r in self.ratios):
            raise ValueError(f"ratios must be non-empty and positive, got {self.ratios}")
        if self.fuse not in ("logit-mean", "prob-mean"):
            raise ValueError(f"unknown fusion mode {self.fuse!r}")


def rescale_logits(l: LogitMap, target_w: int, target_h: int) -> LogitMap:
    """Bilinear per-plane rescale; identity sizes return the data unchanged."""
    if target_w <= 0 or target_h <= 0:
        raise ValueError(f"target size must be positive, got {target_w}x{target_h}")
    if (l.width, l.height) == (target_w, target_h):
        return l
    # channels-last so one resample covers all planes
    hwc = np.ascontiguousarray(l.data.transpose(1, 2, 0))
    out = resize_bilinear(hwc, target_w, target_h)
    return LogitMap(np.ascontiguousarray(out.transpose(2, 0, 1)))


def hflip_logits(l: LogitMap) -> LogitMap:
    """Mirror every class plane horizontally; self-inverse and bit-exact."""
    return LogitMap(np.ascontiguousarray(l.data[:, :, ::-1]))


def aggregate(maps: Sequence[LogitMap], fuse: str = "logit-mean") -> LogitMap:
    """Element-wise mean of aligned score tensors.

    Raises:
        ValueError: empty input or mismatched shapes.
    """
    if not maps:
        raise ValueError("aggregate() needs at least one logit map")
    shape = maps[0].data.shape
    for i, m in enumerate(maps):
        if m.data.shape != shape:
            raise ValueError(f"logit map {i} has shape {m.data.shape}, expected {shape}")
    if fuse == "logit-mean":
        acc = np.zeros(shape, dtype=np.float64)
        for m in maps:
            acc += m.data
    elif fuse == "prob-mean":
        acc = np.zeros(shape, dtype=np.float64)
        for m in maps:
            z = m.data.astype(np.float64)
            z -= z.max(axis=0, keepdims=True)
            e = np.exp(z)
            acc += e / e.sum(axis=0, keepdims=True)
    else:
        raise ValueError(f"unknown fusion mode {fuse!r}")
    return LogitMap((acc / len(maps)).astype(np.float32))


def argmax_mask(l: LogitMap, space: str = UNIFIED_SPACE_NAME) -> MaskImage:
    """Per-pixel winning class; ties go to the lowest class index.

    Raises:
        DataError: on NaN or infinite scores.
    """
    if not np.isfinite(l.data).all():
        bad = np.argwhere(~np.isfinite(l.data))[0]
        raise DataError(
            f"non-finite logit at class={int(bad[0])}, y={int(bad[1])}, x={int(bad[2])}"
        )
    out = np.argmax(l.data, axis=0)
    dtype = np.uint8 if l.classes <= 256 else np.uint16
    return MaskImage(out.astype(dtype), space=space)


class CallablePredictor:
    """In-process predictor around fn(image_path, scale, flip) -> (C, H, W) array."""

    def __init__(self, fn: Callable[[str, tuple[int, int], bool], np.ndarray]):
        self.fn = fn
        self.calls = 0

    def predict(self, image_path: str | Path, scale: tuple[int, int], flip: bool) -> LogitMap:
        self.calls += 1
        return LogitMap(np.asarray(self.fn(str(image_path), scale, flip)))

    def close(self) -> None:
        pass


class SubprocessPredictor:
    """Line-protocol client for an external predictor process."""

    def __init__(self, command: str | Sequence[str]):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.argv = argv
        self.calls = 0
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise PredictorError(f"cannot start predictor {argv!r}: {e}") from None

    def predict(self, image_path: str | Path, scale: tuple[int, int], flip: bool) -> LogitMap:
        self.calls += 1
        self._next_id += 1
        req_id = f"req-{self._next_id}"
        request = {
            "id": req_id,
            "image_path": str(image_path),
            "scale": [int(scale[0]), int(scale[1])],
            "flip": bool(flip),
        }
        try:
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (OSError, ValueError) as e:
            raise PredictorError(f"predictor pipe failed: {e}") from None
        if not line:
            code = self._proc.poll()
            raise PredictorError(f"predictor exited (code {code}) before replying")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise PredictorError(f"malformed predictor reply: {line!r}") from None
        if reply.get("id") != req_id:
            raise PredictorError(f"reply id {reply.get('id')!r} does not match {req_id!r}")
        if "error" in reply:
            raise PredictorError(f"predictor error: {reply['error']}")
        if "logit_path" not in reply:
            raise PredictorError(f"predictor reply missing logit_path: {reply!r}")
        return LogitMap(read_sglt(reply["logit_path"]))

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=10)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def run_tta(image_path: str | Path, predictor, cfg: TtaConfig) -> MaskImage:
    """Full fusion for one image; output matches the image's own size.

    Issues ``len(ratios) * (2 if flip else 1)`` predictor calls.

    Raises:
        PredictorError: wrapping any predictor failure with the
            (ratio, flip) it occurred at.
    """
    w0, h0 = image_size(image_path)
    maps: list[LogitMap] = []
    for ratio in cfg.ratios:
        scale = fit_size(w0, h0, cfg.base_scale[0] * ratio, cfg.base_scale[1] * ratio)
        for flip in (False, True) if cfg.flip else (False,):
            try:
                logits = predictor.predict(image_path, scale, flip)
            except PredictorError as e:
                raise PredictorError(f"ratio {ratio}, flip {flip}: {e}") from None
            if flip:
                logits = hflip_logits(logits)
            maps.append(rescale_logits(logits, w0, h0))
    return argmax_mask(aggregate(maps, cfg.fuse))
