"""Dataset descriptors, sample manifests, and count verification.

Nine training datasets are built in, with their published train/val image
counts and original/projected class counts. A *manifest* is a
deterministic listing of (image, mask) pairs for a dataset split, stored
as line-delimited JSON so it streams, diffs, and appends cleanly.

Manifest record fields are exactly: dataset, split, image, mask, width,
height. Paths are POSIX-style and relative to the dataset root they were
scanned from. Records are ordered lexicographically by
(dataset, split, image), so identical trees always produce identical
files and checksums.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError
from .label_space import LabelSpace
from .pngio import image_size, read_mask

logger = logging.getLogger(__name__)

SCENES = ("natural", "driving", "indoor", "artificial")
SPLITS = ("train", "val")


@dataclass(frozen=True)
class DatasetDescriptor:
    """Static description of one dataset: counts, scene, and layout rules.

    ``image_dir`` / ``mask_dir`` are root-relative templates with a
    ``{split}`` placeholder; pairing is by shared filename stem with the
    given suffixes, since the real datasets ship heterogeneous layouts.
    """

    name: str
    scene: str
    train_count: int
    val_count: int
    original_classes: int
    projected_classes: int
    mapping_file: str = ""
    image_dir: str = "{split}/images"
    mask_dir: str = "{split}/masks"
    image_suffix: str = ".jpg"
    mask_suffix: str = ".png"

    def __post_init__(self):
        if self.scene not in SCENES:
            raise ValueError(f"unknown scene {self.scene!r} for dataset {self.name!r}")
        if self.train_count <= 0 or self.val_count <= 0:
            raise ValueError(f"dataset {self.name!r}: counts must be positive")

    def expected_count(self, split: str) -> int:
        return self.train_count if split == "train" else self.val_count


def builtin_catalog() -> tuple[DatasetDescriptor, ...]:
    """The nine training datasets with their published statistics."""

    def d(name, scene, train, val, orig, proj, img_suffix=".jpg"):
        return DatasetDescriptor(
            name=name,
            scene=scene,
            train_count=train,
            val_count=val,
            original_classes=orig,
            projected_classes=proj,
            mapping_file=f"mappings/{name.lower()}.csv",
            image_suffix=img_suffix,
        )

    return (
        d("COCO", "natural", 118287, 5000, 201, 133),
        d("ADE20K", "natural", 20210, 2000, 151, 146),
        d("Cityscapes", "driving", 2975, 500, 34, 31, img_suffix=".png"),
        d("Vistas", "driving", 18000, 2000, 66, 64),
        d("BDD", "driving", 7000, 1000, 19, 19),
        d("IDD", "driving", 6993, 981, 39, 26),
        d("WildDash2", "driving", 3413, 857, 34, 31),
        d("ScanNet", "indoor", 19466, 5436, 41, 41),
        d("VIPER", "artificial", 13367, 4959, 32, 32, img_suffix=".png"),
    )


def catalog_by_name(
    catalog: tuple[DatasetDescriptor, ...] | None = None,
) -> dict[str, DatasetDescriptor]:
    return {d.name: d for d in (catalog or builtin_catalog())}


def find_descriptor(name: str) -> DatasetDescriptor | None:
    """Case/punctuation-insensitive lookup, so 'wilddash 2' finds WildDash2."""
    key = "".join(ch for ch in name.lower() if ch.isalnum())
    for d in builtin_catalog():
        if "".join(ch for ch in d.name.lower() if ch.isalnum()) == key:
            return d
    return None


@dataclass(frozen=True)
class SampleRecord:
    dataset: str
    split: str
    image: str
    mask: str
    width: int | None = None
    height: int | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "dataset": self.dataset,
                "split": self.split,
                "image": self.image,
                "mask": self.mask,
                "width": self.width,
                "height": self.height,
            },
            separators=(",", ":"),
        )

    @staticmethod
    def from_json(line: str) -> "SampleRecord":
        try:
            obj = json.loads(line)
            return SampleRecord(
                dataset=obj["dataset"],
                split=obj["split"],
                image=obj["image"],
                mask=obj["mask"],
                width=obj.get("width"),
                height=obj.get("height"),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise ParseError(f"bad manifest record: {e}: {line!r}") from None


@dataclass(frozen=True)
class Manifest:
    """Ordered sample records plus scan warnings (orphans are not serialized)."""

    records: tuple[SampleRecord, ...]
    orphans: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def counts(self) -> dict[tuple[str, str], int]:
        out: dict[tuple[str, str], int] = {}
        for r in self.records:
            key = (r.dataset, r.split)
            out[key] = out.get(key, 0) + 1
        return out

    def datasets(self) -> tuple[str, ...]:
        return tuple(sorted({r.dataset for r in self.records}))

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    @property
    def checksum(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()

    @staticmethod
    def from_jsonl(text: str) -> "Manifest":
        records = [SampleRecord.from_json(line) for line in text.splitlines() if line.strip()]
        return Manifest(tuple(records))


def _sorted_records(records: list[SampleRecord]) -> tuple[SampleRecord, ...]:
    return tuple(sorted(records, key=lambda r: (r.dataset, r.split, r.image)))


def build_manifest(
    desc: DatasetDescriptor,
    root: str | Path,
    splits: tuple[str, ...] = SPLITS,
    collect_dims: bool = True,
    strict: bool = False,
) -> Manifest:
    """Scan a dataset tree and pair images with masks by filename stem.

    Images without a mask (and vice versa) are reported as orphans, not
    records; dimension disagreements between an image and its mask are
    treated the same way. Under ``strict`` any warning raises.

    Raises:
        DataError: unreadable directory, or any warning when strict.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} does not exist or is not a directory")
    records: list[SampleRecord] = []
    orphans: list[str] = []
    for split in splits:
        img_dir = root / desc.image_dir.format(split=split)
        mask_dir = root / desc.mask_dir.format(split=split)
        if not img_dir.is_dir():
            orphans.append(f"{desc.name}/{split}: missing image dir {img_dir}")
            continue
        images = {p.stem: p for p in sorted(img_dir.glob(f"*{desc.image_suffix}"))}
        masks = (
            {p.stem: p for p in sorted(mask_dir.glob(f"*{desc.mask_suffix}"))}
            if mask_dir.is_dir()
            else {}
        )
        for stem in sorted(images.keys() | masks.keys()):
            if stem not in masks:
                orphans.append(f"{desc.name}/{split}: image {stem} has no mask")
                continue
            if stem not in images:
                orphans.append(f"{desc.name}/{split}: mask {stem} has no image")
                continue
            width = height = None
            if collect_dims:
                iw, ih = image_size(images[stem])
                mw, mh = image_size(masks[stem])
                if (iw, ih) != (mw, mh):
                    orphans.append(
                        f"{desc.name}/{split}: {stem} image is {iw}x{ih} "
                        f"but mask is {mw}x{mh}"
                    )
                    continue
                width, height = iw, ih
            records.append(
                SampleRecord(
                    dataset=desc.name,
                    split=split,
                    image=images[stem].relative_to(root).as_posix(),
                    mask=masks[stem].relative_to(root).as_posix(),
                    width=width,
                    height=height,
                )
            )
    for w in orphans:
        logger.warning("%s", w)
    if strict and orphans:
        raise DataError("manifest scan warnings under strict mode:\n" + "\n".join(orphans))
    if not records:
        logger.warning("%s: empty manifest under %s", desc.name, root)
    return Manifest(_sorted_records(records), tuple(orphans))


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    mismatches: tuple[str, ...]


def verify_manifest(m: Manifest, desc: DatasetDescriptor) -> VerifyReport:
    """Compare per-split record counts against the descriptor's expectations."""
    counts = m.counts()
    mismatches = []
    for split in SPLITS:
        actual = counts.get((desc.name, split), 0)
        expected = desc.expected_count(split)
        if actual != expected:
            mismatches.append(
                f"{desc.name}/{split}: expected {expected} records, "
                f"found {actual} (delta {actual - expected:+d})"
            )
    foreign = sorted({r.dataset for r in m.records} - {desc.name})
    for name in foreign:
        mismatches.append(f"manifest contains records for foreign dataset {name!r}")
    return VerifyReport(ok=not mismatches, mismatches=tuple(mismatches))


def class_histogram(m: Manifest, space: LabelSpace, root: str | Path) -> dict[int, int]:
    """Per-class non-void pixel counts over every mask in the manifest.

    Raises:
        DataError: on a pixel value that is neither a class of ``space``
            nor its void id, reporting file and coordinate.
    """
    root = Path(root)
    valid = np.zeros(space.max_id + 1, dtype=bool)
    for c in space.classes:
        valid[c.id] = True
    totals = np.zeros(space.max_id + 1, dtype=np.int64)
    for r in m.records:
        mask = read_mask(root / r.mask)
        if mask.size == 0:
            continue
        if int(mask.max()) > space.max_id or not valid[mask].all():
            flat_bad = (mask > space.max_id) | ~valid[np.minimum(mask, space.max_id)]
            y, x = (int(v) for v in np.argwhere(flat_bad)[0])
            raise DataError(
                f"{r.mask}: pixel ({x}, {y}) has value {int(mask[y, x])}, "
                f"not a class of space {space.name!r}"
            )
        totals += np.bincount(mask.ravel(), minlength=space.max_id + 1)
    if space.void_id is not None:
        totals[space.void_id] = 0
    return {cid: int(totals[cid]) for cid in sorted(space.ids) if totals[cid] > 0}


def save_manifest(m: Manifest, path: str | Path) -> None:
    from .pngio import atomic_write_bytes

    atomic_write_bytes(path, m.to_jsonl().encode("utf-8"))


def load_manifest(path: str | Path) -> Manifest:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read manifest {path}: {e}") from None
    return Manifest.from_jsonl(text)
