"""Confusion-matrix accumulation, per-class IoU, and loss verification.

Scoring runs in each dataset's own label space: predictions made in the
shared space are back-projected first, then tallied against ground truth.
Pixels whose ground truth is the ignore class contribute nothing. A
prediction that back-projects to void under a non-void ground truth lands
in the void column, so pixel totals stay conserved.

Confusion matrices are 64-bit and form a commutative monoid under
element-wise addition, which makes chunked or parallel evaluation exactly
equal to a single pass. IoU per class is diag / (row + col - diag);
classes with an empty union are left out of the mean rather than scored
0 or 1.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .catalog import Manifest
from .errors import DataError
from .label_space import LabelSpace, MappingTable, MaskImage, build_lut, invert_mapping, project_mask
from .pngio import read_mask
from .tta import LogitMap

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[gt][pred] over the non-ignored pixels seen so far."""

    counts: np.ndarray

    def __post_init__(self):
        c = self.counts
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {c.shape}")
        if c.dtype != np.int64:
            object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @staticmethod
    def zeros(classes: int) -> "ConfusionMatrix":
        return ConfusionMatrix(np.zeros((classes, classes), dtype=np.int64))


@dataclass(frozen=True)
class EvalConfig:
    """How to score one dataset.

    ``mapping`` is the dataset-to-shared-space table; scoring inverts it
    to bring predictions home. ``unified=True`` is the diagnostics mode
    that scores in the shared space instead (projecting ground truth
    forward when a mapping is present).
    """

    space: LabelSpace
    ignore_class: int
    mapping: MappingTable | None = None
    unified: bool = False
    strict: bool = False
    inversion_policy: str = "first-listed"

    def __post_init__(self):
        if self.ignore_class not in self.space.ids:
            raise ValueError(
                f"ignore class {self.ignore_class} is not in space {self.space.name!r}"
            )


@dataclass(frozen=True)
class IoUReport:
    """Per-class IoU (defined classes only), their unweighted mean, and tallies."""

    per_class_iou: Mapping[int, float]
    miou: float
    counted_classes: int
    pixel_total: int
    missing: tuple[str, ...] = ()

    def to_json(self, dataset: str, classes: int) -> str:
        doc = {
            "dataset": dataset,
            "classes": classes,
            "per_class_iou": {str(k): self.per_class_iou[k] for k in sorted(self.per_class_iou)},
            "miou": self.miou,
            "pixel_total": self.pixel_total,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def accumulate(cm: ConfusionMatrix, pred: MaskImage, gt: MaskImage, cfg: EvalConfig) -> ConfusionMatrix:
    """Tally one image pair into a new matrix (the input is not mutated).

    Raises:
        DataError: dimension or space mismatch, or pixel values outside
            the matrix.
    """
    if pred.data.shape != gt.data.shape:
        raise DataError(f"pred {pred.data.shape} and gt {gt.data.shape} dims differ")
    if pred.space != gt.space:
        raise DataError(f"pred space {pred.space!r} and gt space {gt.space!r} differ")
    c = cm.classes
    gt_flat = gt.data.ravel().astype(np.int64)
    pred_flat = pred.data.ravel().astype(np.int64)
    valid = gt_flat != cfg.ignore_class
    if not valid.any():
        return cm
    gt_v = gt_flat[valid]
    pred_v = pred_flat[valid]
    if int(gt_v.max()) >= c or int(pred_v.max()) >= c:
        raise DataError(
            f"pixel value outside the {c}-class matrix "
            f"(gt max {int(gt_v.max())}, pred max {int(pred_v.max())})"
        )
    binned = np.bincount(gt_v * c + pred_v, minlength=c * c).reshape(c, c)
    return ConfusionMatrix(cm.counts + binned)


def merge(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionMatrix:
    """Element-wise sum; the monoid operation behind parallel evaluation."""
    if a.classes != b.classes:
        raise ValueError(f"cannot merge {a.classes}-class with {b.classes}-class matrix")
    return ConfusionMatrix(a.counts + b.counts)


def iou_report(cm: ConfusionMatrix, exclude: Iterable[int] = ()) -> IoUReport:
    """Per-class IoU and the unweighted mean over defined classes.

    ``exclude`` drops classes (typically the void column) from the mean
    even when their union is non-empty.

    Raises:
        DataError: when no class has a non-empty union.
    """
    counts = cm.counts
    diag = np.diag(counts).astype(np.float64)
    union = counts.sum(axis=1) + counts.sum(axis=0) - np.diag(counts)
    excluded = set(exclude)
    per_class: dict[int, float] = {}
    for cid in range(cm.classes):
        if cid in excluded or union[cid] == 0:
            continue
        per_class[cid] = float(diag[cid] / union[cid])
    if not per_class:
        raise DataError("every class has an empty union; nothing to score")
    miou = float(np.mean(list(per_class.values())))
    return IoUReport(
        per_class_iou=per_class,
        miou=miou,
        counted_classes=len(per_class),
        pixel_total=cm.total,
    )


def evaluate_dataset(
    pred_dir: str | Path,
    gt_manifest: Manifest,
    cfg: EvalConfig,
    root: str | Path,
    threads: int = 1,
) -> IoUReport:
    """Score one dataset's predictions against its ground-truth manifest.

    Predictions are PNG masks named after each record's image stem. In
    the default mode they are expected in the shared space and are
    back-projected through the inverted mapping before tallying. With
    ``threads > 1`` images are tallied into per-chunk matrices and
    merged, which equals the serial pass exactly.

    Raises:
        ValueError: default mode without a mapping (scoring in the shared
            space requires the explicit ``unified`` flag).
        DataError: missing predictions under strict mode, or nothing to
            score at all.
    """
    if cfg.mapping is None and not cfg.unified:
        raise ValueError(
            "back-projection mapping is required; pass unified=True only for "
            "shared-space diagnostics"
        )
    pred_dir = Path(pred_dir)
    root = Path(root)

    if cfg.unified:
        score_space = cfg.mapping.target_space if cfg.mapping else cfg.space
        fwd_lut = build_lut(cfg.mapping) if cfg.mapping else None
        back_lut = None
        ignore = score_space.void_id
        if ignore is None:
            raise DataError(f"shared space {score_space.name!r} declares no void class")
    else:
        score_space = cfg.space
        fwd_lut = None
        back_lut = build_lut(invert_mapping(cfg.mapping, cfg.inversion_policy))
        ignore = cfg.ignore_class

    score_cfg = EvalConfig(space=score_space, ignore_class=ignore)
    pred_space = cfg.mapping.target if cfg.mapping else score_space.name

    def tally(records) -> tuple[ConfusionMatrix, list[str]]:
        cm = ConfusionMatrix.zeros(score_space.max_id + 1)
        skipped: list[str] = []
        for record in records:
            pred_path = pred_dir / (Path(record.image).stem + ".png")
            if not pred_path.exists():
                skipped.append(record.image)
                continue
            gt = MaskImage(read_mask(root / record.mask), space=cfg.space.name)
            pred = MaskImage(read_mask(pred_path), space=pred_space)
            if cfg.unified:
                if fwd_lut is not None:
                    gt = project_mask(gt, fwd_lut, score_space)
                else:
                    gt = MaskImage(gt.data, space=score_space.name)
            else:
                pred = project_mask(pred, back_lut, score_space)
            cm = accumulate(cm, pred, gt, score_cfg)
        return cm, skipped

    if threads > 1 and len(gt_manifest.records) > 1:
        from concurrent.futures import ThreadPoolExecutor

        chunks = [gt_manifest.records[i::threads] for i in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(tally, [c for c in chunks if c]))
        cm = results[0][0]
        missing = list(results[0][1])
        for part_cm, part_missing in results[1:]:
            cm = merge(cm, part_cm)
            missing.extend(part_missing)
        missing.sort()
    else:
        cm, missing = tally(gt_manifest.records)

    for name in missing:
        logger.warning("no prediction for %s", name)
    if missing and cfg.strict:
        raise DataError(f"{len(missing)} prediction(s) missing: {missing[:5]}")
    report = iou_report(cm, exclude=(ignore,))
    return IoUReport(
        per_class_iou=report.per_class_iou,
        miou=report.miou,
        counted_classes=report.counted_classes,
        pixel_total=report.pixel_total,
        missing=tuple(missing),
    )


def masked_cross_entropy(logits: LogitMap, gt: MaskImage, ignore: int) -> float:
    """Mean negative log softmax score of the true class over non-ignored pixels.

    Computed in float64 with max-subtraction, so uniform scores over C
    classes give exactly ln(C).

    Raises:
        DataError: shape mismatch, out-of-range ground truth, or no valid
            pixels.
    """
    if logits.data.shape[1:] != gt.data.shape:
        raise DataError(
            f"logits {logits.data.shape[1:]} and gt {gt.data.shape} dims differ"
        )
    z = logits.data.astype(np.float64)
    gt_flat = gt.data.ravel().astype(np.int64)
    valid = gt_flat != ignore
    if not valid.any():
        raise DataError("no pixels to score: all ground truth is ignored")
    if int(gt_flat[valid].max()) >= logits.classes:
        raise DataError(
            f"ground-truth class {int(gt_flat[valid].max())} outside "
            f"{logits.classes} logit planes"
        )
    flat = z.reshape(logits.classes, -1)
    shifted = flat - flat.max(axis=0, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=0))
    nll = lse[valid] - shifted[gt_flat[valid], np.flatnonzero(valid)]
    return float(nll.mean())
