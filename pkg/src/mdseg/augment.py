"""Training-time augmentation of (image, mask) pairs.

The pipeline applies, in order: ratio-jittered keep-aspect resize, random
crop to a fixed size (padding smaller inputs first), horizontal flip, and
photometric distortion. Geometric stages transform image and mask
jointly; the image is resampled bilinearly and the mask nearest-neighbor,
so masks never contain class values that were absent from the input.

Every random decision is drawn up front into an :class:`AugDraws` record
(fixed draw order: ratio, crop x, crop y, flip, then the nine photometric
draws), and application is a pure function of (buffers, config, draws).
Serialized draw records double as a replay log: re-applying a logged
record to the same input is bit-identical to the original run.

Photometric color math, fixed for reproducibility:

* Brightness/contrast are per-value maps executed through 256-entry
  tables: ``v + delta`` and ``v * alpha``, clamped to [0, 255] and
  rounded half-to-even.
* Saturation and hue work in an HSV-style decomposition with value
  ``V = max(R,G,B)`` and chroma ``C = V - min(R,G,B)``. Hue lives on an
  8-bit circle: ``H = 256/6 * h6`` with the usual piecewise ``h6``, and
  shifts wrap mod 256. Saturation scaling by ``a`` reduces to
  ``ch' = V - a * (V - ch)`` per channel; hue reconstruction uses
  ``ch' = V - C * clamp(min(k, 4 - k), 0, 1)`` with
  ``k = (n + h6') mod 6`` and ``n = 5, 3, 1`` for R, G, B. Gray pixels
  (``C = 0``) are fixed points of both operations and are skipped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .resample import (
    fit_size,
    resize_image_bilinear,
    resize_image_bilinear_window,
    resize_nearest,
    resize_nearest_window,
)
from .rng import STREAM_AUGMENT, RngStream


@dataclass(frozen=True)
class PhotometricParams:
    brightness_delta: float = 32.0
    contrast_range: tuple[float, float] = (0.5, 1.5)
    saturation_range: tuple[float, float] = (0.5, 1.5)
    hue_delta: float = 18.0
    prob: float = 0.5

    def __post_init__(self):
        if self.brightness_delta < 0 or self.hue_delta < 0:
            raise ValueError("photometric deltas must be non-negative")
        for lo, hi in (self.contrast_range, self.saturation_range):
            if not 0 < lo <= hi:
                raise ValueError(f"bad photometric range ({lo}, {hi})")


@dataclass(frozen=True)
class AugConfig:
    base_scale: tuple[int, int] = (2048, 1024)
    ratio_range: tuple[float, float] = (0.5, 2.0)
    crop: tuple[int, int] = (1024, 1024)
    flip_prob: float = 0.5
    photometric: PhotometricParams = PhotometricParams()

    def __post_init__(self):
        if self.ratio_range[0] > self.ratio_range[1]:
            raise ValueError(f"bad ratio range {self.ratio_range}")
        if self.crop[0] <= 0 or self.crop[1] <= 0:
            raise ValueError(f"crop dims must be positive, got {self.crop}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip probability {self.flip_prob} outside [0, 1]")

    def to_dict(self) -> dict:
        p = self.photometric
        return {
            "base_scale": list(self.base_scale),
            "ratio_range": list(self.ratio_range),
            "crop": list(self.crop),
            "flip_prob": self.flip_prob,
            "photometric": {
                "brightness_delta": p.brightness_delta,
                "contrast_range": list(p.contrast_range),
                "saturation_range": list(p.saturation_range),
                "hue_delta": p.hue_delta,
                "prob": p.prob,
            },
        }

    @staticmethod
    def from_dict(obj: dict) -> "AugConfig":
        p = obj["photometric"]
        return AugConfig(
            base_scale=tuple(obj["base_scale"]),
            ratio_range=tuple(obj["ratio_range"]),
            crop=tuple(obj["crop"]),
            flip_prob=obj["flip_prob"],
            photometric=PhotometricParams(
                brightness_delta=p["brightness_delta"],
                contrast_range=tuple(p["contrast_range"]),
                saturation_range=tuple(p["saturation_range"]),
                hue_delta=p["hue_delta"],
                prob=p["prob"],
            ),
        )


@dataclass(frozen=True)
class PhotoDraws:
    """All nine photometric draws; gates fire when below the apply probability."""

    brightness_gate: float
    brightness_delta: float
    contrast_order: float
    contrast_gate: float
    contrast_alpha: float
    saturation_gate: float
    saturation_alpha: float
    hue_gate: float
    hue_delta: float


@dataclass(frozen=True)
class AugDraws:
    """One sample's complete set of random decisions."""

    ratio: float
    crop_x: int
    crop_y: int
    flip_u: float
    photo: PhotoDraws

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "crop_x": self.crop_x,
            "crop_y": self.crop_y,
            "flip_u": self.flip_u,
            "photo": vars(self.photo).copy(),
        }

    @staticmethod
    def from_dict(obj: dict) -> "AugDraws":
        try:
            return AugDraws(
                ratio=obj["ratio"],
                crop_x=obj["crop_x"],
                crop_y=obj["crop_y"],
                flip_u=obj["flip_u"],
                photo=PhotoDraws(**obj["photo"]),
            )
        except (KeyError, TypeError) as e:
            raise ParseError(f"bad draw record: {e}") from None


def _check_pair(img: np.ndarray, mask: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"image must be (H, W, 3), got {img.shape}")
    if mask.ndim != 2:
        raise ValueError(f"mask must be (H, W), got {mask.shape}")
    if img.shape[:2] != mask.shape:
        raise ValueError(f"image {img.shape[:2]} and mask {mask.shape} dims differ")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("zero-sized input")


def draw_photo_params(params: PhotometricParams, rng: RngStream) -> PhotoDraws:
    """Draw the nine photometric decisions in their fixed order."""
    return PhotoDraws(
        brightness_gate=rng.unit(),
        brightness_delta=rng.uniform(-params.brightness_delta, params.brightness_delta),
        contrast_order=rng.unit(),
        contrast_gate=rng.unit(),
        contrast_alpha=rng.uniform(*params.contrast_range),
        saturation_gate=rng.unit(),
        saturation_alpha=rng.uniform(*params.saturation_range),
        hue_gate=rng.unit(),
        hue_delta=rng.uniform(-params.hue_delta, params.hue_delta),
    )


def draw_params(src_w: int, src_h: int, cfg: AugConfig, rng: RngStream) -> AugDraws:
    """Draw one sample's decisions in the fixed order (see module docs)."""
    ratio = rng.uniform(*cfg.ratio_range)
    rw, rh = fit_size(src_w, src_h, cfg.base_scale[0] * ratio, cfg.base_scale[1] * ratio)
    pad_w = max(rw, cfg.crop[0])
    pad_h = max(rh, cfg.crop[1])
    crop_x = rng.integer(pad_w - cfg.crop[0] + 1)
    crop_y = rng.integer(pad_h - cfg.crop[1] + 1)
    flip_u = rng.unit()
    photo = draw_photo_params(cfg.photometric, rng)
    return AugDraws(ratio=ratio, crop_x=crop_x, crop_y=crop_y, flip_u=flip_u, photo=photo)


def apply_resize(
    img: np.ndarray, mask: np.ndarray, ratio: float, cfg: AugConfig
) -> tuple[np.ndarray, np.ndarray]:
    h, w = img.shape[:2]
    out_w, out_h = fit_size(w, h, cfg.base_scale[0] * ratio, cfg.base_scale[1] * ratio)
    if (out_w, out_h) == (w, h):
        return img, mask
    return (
        resize_image_bilinear(img, out_w, out_h),
        resize_nearest(mask, out_w, out_h),
    )


def apply_crop(
    img: np.ndarray,
    mask: np.ndarray,
    crop: tuple[int, int],
    x: int,
    y: int,
    void: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Crop at (x, y), padding first when the input is smaller than the crop."""
    cw, ch = crop
    h, w = img.shape[:2]
    if w < cw or h < ch:
        pw, ph = max(w, cw), max(h, ch)
        pimg = np.zeros((ph, pw, 3), dtype=img.dtype)
        pimg[:h, :w] = img
        pmask = np.full((ph, pw), void, dtype=mask.dtype)
        pmask[:h, :w] = mask
        img, mask = pimg, pmask
        h, w = ph, pw
    if not (0 <= x <= w - cw and 0 <= y <= h - ch):
        raise ValueError(f"crop origin ({x}, {y}) invalid for {w}x{h} into {cw}x{ch}")
    return img[y : y + ch, x : x + cw].copy(), mask[y : y + ch, x : x + cw].copy()


def apply_flip(
    img: np.ndarray, mask: np.ndarray, flipped: bool
) -> tuple[np.ndarray, np.ndarray]:
    if not flipped:
        return img, mask
    return np.ascontiguousarray(img[:, ::-1]), np.ascontiguousarray(mask[:, ::-1])


def _value_map(img: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Apply a per-value float map via a 256-entry LUT (clamp + round half-even)."""
    lut = np.rint(np.clip(table, 0.0, 255.0)).astype(np.uint8)
    return np.take(lut, img)


def _scale_saturation(img: np.ndarray, alpha: float) -> np.ndarray:
    v = np.maximum(np.maximum(img[:, :, 0], img[:, :, 1]), img[:, :, 2])
    m = np.minimum(np.minimum(img[:, :, 0], img[:, :, 1]), img[:, :, 2])
    idx = np.flatnonzero(v != m)  # gray pixels are fixed points
    if idx.size == 0:
        return img
    out = img.copy()
    sub = img.reshape(-1, 3)[idx].astype(np.float32)
    vf = v.reshape(-1)[idx].astype(np.float32)[:, None]
    scaled = vf - np.float32(alpha) * (vf - sub)
    np.clip(scaled, 0.0, 255.0, out=scaled)
    out.reshape(-1, 3)[idx] = np.rint(scaled).astype(np.uint8)
    return out


def _shift_hue(img: np.ndarray, delta: float) -> np.ndarray:
    v = np.maximum(np.maximum(img[:, :, 0], img[:, :, 1]), img[:, :, 2])
    m = np.minimum(np.minimum(img[:, :, 0], img[:, :, 1]), img[:, :, 2])
    idx = np.flatnonzero(v != m)  # hue is undefined on gray pixels
    if idx.size == 0:
        return img
    flat = img.reshape(-1, 3)
    r = flat[idx, 0].astype(np.float32)
    g = flat[idx, 1].astype(np.float32)
    b = flat[idx, 2].astype(np.float32)
    vf = v.reshape(-1)[idx].astype(np.float32)
    c = vf - m.reshape(-1)[idx].astype(np.float32)
    h6 = np.empty_like(vf)
    is_r = vf == r
    is_g = ~is_r & (vf == g)
    is_b = ~(is_r | is_g)
    h6[is_r] = ((g[is_r] - b[is_r]) / c[is_r]) % 6.0
    h6[is_g] = (b[is_g] - r[is_g]) / c[is_g] + 2.0
    h6[is_b] = (r[is_b] - g[is_b]) / c[is_b] + 4.0
    h6 = ((h6 * (256.0 / 6.0) + np.float32(delta)) % 256.0) * (6.0 / 256.0)
    out = img.copy()
    out_flat = out.reshape(-1, 3)
    for ch, n in ((0, 5.0), (1, 3.0), (2, 1.0)):
        k = (n + h6) % 6.0
        k = np.maximum(np.minimum(np.minimum(k, 4.0 - k), 1.0), 0.0)
        vals = vf - c * k
        np.clip(vals, 0.0, 255.0, out=vals)
        out_flat[idx, ch] = np.rint(vals).astype(np.uint8)
    return out


def apply_photometric(img: np.ndarray, params: PhotometricParams, d: PhotoDraws) -> np.ndarray:
    """Apply the gated photometric ops for one draw record.

    Order: brightness, then contrast either before or after the color ops
    depending on the order draw, then saturation, then hue.
    """
    p = params.prob
    out = img
    values = np.arange(256, dtype=np.float32)
    if d.brightness_gate < p:
        out = _value_map(out, values + np.float32(d.brightness_delta))
    contrast_first = d.contrast_order < 0.5
    if contrast_first and d.contrast_gate < p:
        out = _value_map(out, values * np.float32(d.contrast_alpha))
    if d.saturation_gate < p:
        out = _scale_saturation(out, d.saturation_alpha)
    if d.hue_gate < p:
        out = _shift_hue(out, d.hue_delta)
    if not contrast_first and d.contrast_gate < p:
        out = _value_map(out, values * np.float32(d.contrast_alpha))
    return out


def _fused_resize_crop(
    img: np.ndarray,
    mask: np.ndarray,
    cfg: AugConfig,
    draws: AugDraws,
    void: int,
) -> tuple[np.ndarray, np.ndarray]:
    """resize + crop in one step, evaluating only pixels inside the crop.

    Bit-identical to apply_resize followed by apply_crop (resampling is
    per-pixel independent); the bound on the work is the crop area, not
    the virtual resized image, which matters when the ratio upscales.
    """
    h, w = img.shape[:2]
    rw, rh = fit_size(w, h, cfg.base_scale[0] * draws.ratio, cfg.base_scale[1] * draws.ratio)
    cw, ch = cfg.crop
    x, y = draws.crop_x, draws.crop_y
    if not (0 <= x <= max(rw, cw) - cw and 0 <= y <= max(rh, ch) - ch):
        raise ValueError(f"crop origin ({x}, {y}) invalid for {rw}x{rh} into {cw}x{ch}")
    out_img = np.zeros((ch, cw, 3), dtype=np.uint8)
    out_mask = np.full((ch, cw), void, dtype=mask.dtype)
    vis_w = min(x + cw, rw) - x
    vis_h = min(y + ch, rh) - y
    if vis_w > 0 and vis_h > 0:
        if (rw, rh) == (w, h):
            out_img[:vis_h, :vis_w] = img[y : y + vis_h, x : x + vis_w]
            out_mask[:vis_h, :vis_w] = mask[y : y + vis_h, x : x + vis_w]
        else:
            out_img[:vis_h, :vis_w] = resize_image_bilinear_window(
                img, rw, rh, x, y, vis_w, vis_h
            )
            out_mask[:vis_h, :vis_w] = resize_nearest_window(mask, rw, rh, x, y, vis_w, vis_h)
    return out_img, out_mask


def apply_pipeline(
    img: np.ndarray,
    mask: np.ndarray,
    cfg: AugConfig,
    draws: AugDraws,
    void: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministically apply a full draw record; the replay entry point."""
    _check_pair(img, mask)
    img, mask = _fused_resize_crop(img, mask, cfg, draws, void)
    img, mask = apply_flip(img, mask, draws.flip_u < cfg.flip_prob)
    img = apply_photometric(img, cfg.photometric, draws.photo)
    return img, mask


# Single-stage operations (draw and apply in one call)


def random_resize(img, mask, cfg: AugConfig, rng: RngStream):
    _check_pair(img, mask)
    return apply_resize(img, mask, rng.uniform(*cfg.ratio_range), cfg)


def random_crop(img, mask, rng: RngStream, crop: tuple[int, int] = (1024, 1024), void: int = 0):
    _check_pair(img, mask)
    h, w = img.shape[:2]
    pad_w, pad_h = max(w, crop[0]), max(h, crop[1])
    x = rng.integer(pad_w - crop[0] + 1)
    y = rng.integer(pad_h - crop[1] + 1)
    return apply_crop(img, mask, crop, x, y, void)


def random_flip(img, mask, rng: RngStream, p: float = 0.5):
    _check_pair(img, mask)
    flipped = rng.unit() < p
    out_img, out_mask = apply_flip(img, mask, flipped)
    return out_img, out_mask, flipped


def photometric_distortion(img, params: PhotometricParams, rng: RngStream):
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8 image, got {img.shape} {img.dtype}")
    return apply_photometric(img, params, draw_photo_params(params, rng))


def train_pipeline(
    img: np.ndarray,
    mask: np.ndarray,
    cfg: AugConfig,
    rng: RngStream,
    void: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw and apply the full pipeline; output is always crop-sized."""
    _check_pair(img, mask)
    draws = draw_params(img.shape[1], img.shape[0], cfg, rng)
    return apply_pipeline(img, mask, cfg, draws, void)


def sample_stream(seed: int, sample_index: int) -> RngStream:
    """The per-sample draw stream; parallel workers stay reproducible."""
    return RngStream(seed, STREAM_AUGMENT, sample_index)


# Draw-log serialization


def draw_log_to_json(seed: int, cfg: AugConfig, entries: list[dict]) -> str:
    """Serialize a draw log: header (version, seed, config) plus per-sample draws.

    Each entry must carry ``index``, ``image``, ``mask`` and ``draws``
    (an AugDraws dict).
    """
    doc = {"version": 1, "seed": seed, "config": cfg.to_dict(), "samples": entries}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def draw_log_from_json(text: str) -> tuple[int, AugConfig, list[dict]]:
    try:
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ParseError(f"unsupported draw-log version {doc.get('version')!r}")
        return doc["seed"], AugConfig.from_dict(doc["config"]), doc["samples"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ParseError(f"bad draw log: {e}") from None
