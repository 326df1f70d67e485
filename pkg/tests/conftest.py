"""Shared fixtures: toy label spaces, synthetic dataset trees, mapping CSVs."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from mdseg.catalog import DatasetDescriptor
from mdseg.label_space import LabelSpace, MappingTable, parse_label_space


def space_csv(n: int, void_first: bool = True) -> str:
    """Label-space CSV with n classes; id 0 is named void when void_first."""
    lines = ["id,name"]
    for i in range(n):
        name = "void" if (i == 0 and void_first) else f"cls_{i}"
        lines.append(f"{i},{name}")
    return "\n".join(lines) + "\n"


def mapping_csv(pairs) -> str:
    """Mapping CSV from (source_id, target_id) pairs; names are synthesized."""
    lines = ["source_id,source_name,target_id,target_name"]
    for s, t in pairs:
        lines.append(f"{s},src_{s},{t},tgt_{t}")
    return "\n".join(lines) + "\n"


def devkit_shaped_mapping_csv(original: int, projected: int) -> str:
    """A mapping file shaped like a dataset's published class mapping.

    All `original` source ids appear; they land on exactly `projected`
    distinct non-void targets (ids 1..projected) in a 256-class space
    with void id 0.
    """
    assert projected <= 255
    pairs = [(i, 1 + (i % projected)) for i in range(original)]
    return mapping_csv(pairs)


def make_space(name: str, n: int, void: int | None = 0) -> LabelSpace:
    text = space_csv(n, void_first=void == 0)
    return parse_label_space(text, name=name)


@pytest.fixture
def toy_space() -> LabelSpace:
    return make_space("toy", 4)  # void=0 plus classes 1..3


@pytest.fixture
def unified_toy() -> LabelSpace:
    return make_space("unified", 16)


@pytest.fixture
def toy_mapping(toy_space, unified_toy) -> MappingTable:
    # bijective on support: 1->5, 2->7, 3->9
    return MappingTable(toy_space, unified_toy, ((1, 5), (2, 7), (3, 9)))


def write_png_mask(path: Path, arr: np.ndarray) -> None:
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path)


def write_png_image(path: Path, arr: np.ndarray) -> None:
    Image.fromarray(arr.astype(np.uint8), mode="RGB").save(path)


def toy_descriptor(name="Toy", train=3, val=2, image_suffix=".png") -> DatasetDescriptor:
    return DatasetDescriptor(
        name=name,
        scene="driving",
        train_count=train,
        val_count=val,
        original_classes=4,
        projected_classes=3,
        image_suffix=image_suffix,
    )


def build_toy_tree(
    root: Path,
    desc: DatasetDescriptor,
    counts: dict[str, int],
    size=(16, 12),
    classes=(0, 1, 2, 3),
    seed=0,
) -> None:
    """Write a synthetic image/mask tree matching a descriptor's layout."""
    rng = np.random.default_rng(seed)
    w, h = size
    for split, n in counts.items():
        img_dir = root / desc.image_dir.format(split=split)
        mask_dir = root / desc.mask_dir.format(split=split)
        img_dir.mkdir(parents=True, exist_ok=True)
        mask_dir.mkdir(parents=True, exist_ok=True)
        for i in range(n):
            stem = f"{split}_{i:04d}"
            img = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
            mask = rng.choice(np.array(classes, dtype=np.uint8), size=(h, w))
            write_png_image(img_dir / f"{stem}{desc.image_suffix}", img)
            write_png_mask(mask_dir / f"{stem}{desc.mask_suffix}", mask)


@pytest.fixture
def toy_tree(tmp_path):
    desc = toy_descriptor()
    build_toy_tree(tmp_path, desc, {"train": 3, "val": 2})
    return tmp_path, desc
