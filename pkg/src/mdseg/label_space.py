"""Label spaces, class-id mappings, and mask projection.

A *label space* is an ordered taxonomy of integer class ids. Datasets each
have their own space; joint training uses one shared 256-class space whose
id 0 is reserved as the void/unlabeled class. A *mapping* is a partial,
possibly many-to-one function from one space's ids to another's; it is
compiled into a dense lookup table for fast per-pixel remapping.

File formats (UTF-8, LF):

* label-space CSV: header ``id,name``, one class per row.
* mapping CSV: header ``source_id,source_name,target_id,target_name``.
  Names are advisory; ids are authoritative.

Unmapped source ids are represented in lookup tables by an in-memory
sentinel (:data:`VOID_SENTINEL`) that is never written to mask files;
projection converts it to the target space's void id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DataError, InversionError, ParseError

VOID_SENTINEL = -1

# Class names that mark a space's void/ignore class when parsing CSVs.
VOID_NAMES = ("void", "unlabeled", "ignore")

UNIFIED_SPACE_NAME = "unified"
UNIFIED_CLASS_COUNT = 256


@dataclass(frozen=True)
class ClassDef:
    """One class of a label space."""

    id: int
    name: str

    def __post_init__(self):
        if self.id < 0:
            raise ParseError(f"class id must be non-negative, got {self.id}")
        if not self.name:
            raise ParseError(f"class {self.id} has an empty name")


@dataclass(frozen=True)
class LabelSpace:
    """An ordered set of classes with an optional void/ignore class."""

    name: str
    classes: tuple[ClassDef, ...]
    void_id: int | None = None

    def __post_init__(self):
        if not self.classes:
            raise ParseError(f"label space {self.name!r} has no classes")
        ids = [c.id for c in self.classes]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ParseError(f"label space {self.name!r} has duplicate ids: {dupes}")
        if self.void_id is not None and self.void_id not in set(ids):
            raise ParseError(
                f"label space {self.name!r}: void id {self.void_id} is not a member class"
            )

    def __len__(self) -> int:
        return len(self.classes)

    @property
    def ids(self) -> frozenset[int]:
        return frozenset(c.id for c in self.classes)

    @property
    def max_id(self) -> int:
        return max(c.id for c in self.classes)

    def name_of(self, class_id: int) -> str:
        for c in self.classes:
            if c.id == class_id:
                return c.name
        raise KeyError(class_id)


@dataclass(frozen=True)
class MappingTable:
    """Partial many-to-one id mapping between two label spaces.

    ``entries`` is ordered as parsed; each source id appears at most once.
    """

    source_space: LabelSpace
    target_space: LabelSpace
    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for s, _ in self.entries:
            if s in seen:
                raise ParseError(
                    f"mapping {self.source}->{self.target}: source id {s} mapped twice"
                )
            seen.add(s)

    @property
    def source(self) -> str:
        return self.source_space.name

    @property
    def target(self) -> str:
        return self.target_space.name

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)


@dataclass(frozen=True)
class ProjectionLUT:
    """Dense realization of a MappingTable over [0, max source id].

    ``table[s]`` is the target id for source id ``s``, or VOID_SENTINEL
    where the mapping is undefined.
    """

    table: np.ndarray
    source: str
    target: str
    target_void: int | None

    def __len__(self) -> int:
        return len(self.table)


@dataclass(frozen=True)
class MaskImage:
    """A 2-D array of class ids tagged with the space it lives in."""

    data: np.ndarray
    space: str

    def __post_init__(self):
        if self.data.ndim != 2:
            raise DataError(f"mask must be 2-D, got shape {self.data.shape}")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class MappingReport:
    """Diagnostics from validate_mapping; ok means no unknown ids."""

    ok: bool
    unmapped_source_ids: tuple[int, ...]
    distinct_target_count: int
    collision_groups: Mapping[int, tuple[int, ...]]
    unknown_rows: tuple[str, ...] = ()


def unified_template(class_count: int = UNIFIED_CLASS_COUNT) -> LabelSpace:
    """Placeholder shared space: id 0 is void/unlabeled, the rest generic names.

    Real deployments load the actual shared-space CSV; this template only
    fixes the shape (class count, void convention) for tests and tooling.
    """
    classes = [ClassDef(0, "unlabeled")]
    classes += [ClassDef(i, f"class_{i:03d}") for i in range(1, class_count)]
    return LabelSpace(UNIFIED_SPACE_NAME, tuple(classes), void_id=0)


def _csv_rows(text: str, expected_header: str) -> list[tuple[int, list[str]]]:
    """Split CSV text into (line_number, fields) rows, checking the header."""
    lines = text.split("\n")
    if not lines or not lines[0].strip():
        raise ParseError("empty file")
    header = lines[0].strip()
    if header != expected_header:
        raise ParseError(f"line 1: expected header {expected_header!r}, got {header!r}")
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        rows.append((n, [f.strip() for f in line.split(",")]))
    if not rows:
        raise ParseError("no data rows after header")
    return rows


def parse_label_space(text: str, name: str = "space") -> LabelSpace:
    """Parse a label-space CSV (header ``id,name``).

    The void class is detected by name: the first class named one of
    ``void``, ``unlabeled`` or ``ignore`` (case-insensitive) becomes the
    space's void id.

    Raises:
        ParseError: on malformed rows, duplicate ids, or an empty file,
            naming the offending line.
    """
    rows = _csv_rows(text, "id,name")
    classes: list[ClassDef] = []
    seen: set[int] = set()
    void_id: int | None = None
    for line_no, fields in rows:
        if len(fields) != 2:
            raise ParseError(f"line {line_no}: expected 2 fields, got {len(fields)}")
        raw_id, cls_name = fields
        try:
            cid = int(raw_id)
        except ValueError:
            raise ParseError(f"line {line_no}: class id {raw_id!r} is not an integer") from None
        if cid < 0:
            raise ParseError(f"line {line_no}: class id must be non-negative, got {cid}")
        if not cls_name:
            raise ParseError(f"line {line_no}: empty class name")
        if cid in seen:
            raise ParseError(f"line {line_no}: duplicate class id {cid}")
        seen.add(cid)
        classes.append(ClassDef(cid, cls_name))
        if void_id is None and cls_name.lower() in VOID_NAMES:
            void_id = cid
    return LabelSpace(name, tuple(classes), void_id=void_id)


def load_label_space(path, name: str | None = None) -> LabelSpace:
    from pathlib import Path

    p = Path(path)
    try:
        return parse_label_space(p.read_text(encoding="utf-8"), name=name or p.stem)
    except ParseError as e:
        raise ParseError(f"{p}: {e}") from None


def parse_mapping_rows(text: str) -> list[tuple[int, int, int]]:
    """Low-level mapping CSV parse: (line_number, source_id, target_id) triples.

    Validates syntax and source-id uniqueness only; use parse_mapping to
    also validate ids against their label spaces.
    """
    rows = _csv_rows(text, "source_id,source_name,target_id,target_name")
    out: list[tuple[int, int, int]] = []
    seen: set[int] = set()
    for line_no, fields in rows:
        if len(fields) != 4:
            raise ParseError(f"line {line_no}: expected 4 fields, got {len(fields)}")
        try:
            sid = int(fields[0])
            tid = int(fields[2])
        except ValueError:
            raise ParseError(f"line {line_no}: non-integer class id") from None
        if sid in seen:
            raise ParseError(f"line {line_no}: source id {sid} mapped twice")
        seen.add(sid)
        out.append((line_no, sid, tid))
    return out


def parse_mapping(text: str, source: LabelSpace, target: LabelSpace) -> MappingTable:
    """Parse and validate a mapping CSV between two already-parsed spaces.

    Raises:
        ParseError: listing every row that references an id unknown to
            its space.
    """
    triples = parse_mapping_rows(text)
    bad: list[str] = []
    for line_no, sid, tid in triples:
        if sid not in source.ids:
            bad.append(f"line {line_no}: source id {sid} not in space {source.name!r}")
        if tid not in target.ids:
            bad.append(f"line {line_no}: target id {tid} not in space {target.name!r}")
    if bad:
        raise ParseError("; ".join(bad))
    return MappingTable(source, target, tuple((s, t) for _, s, t in triples))


def load_mapping(path, source: LabelSpace, target: LabelSpace) -> MappingTable:
    from pathlib import Path

    p = Path(path)
    try:
        return parse_mapping(p.read_text(encoding="utf-8"), source, target)
    except ParseError as e:
        raise ParseError(f"{p}: {e}") from None


def apply_overlay(m: MappingTable, overlay_text: str) -> MappingTable:
    """Apply a corrections overlay CSV on top of a base mapping.

    Overlay rows override base entries source-id-wise; new source ids are
    appended. This keeps hand corrections to a published mapping explicit
    and auditable instead of editing the base file.
    """
    overlay = parse_mapping(overlay_text, m.source_space, m.target_space)
    merged = dict(m.entries)
    merged.update(overlay.as_dict())
    base_order = [s for s, _ in m.entries]
    new_ids = [s for s, _ in overlay.entries if s not in set(base_order)]
    entries = tuple((s, merged[s]) for s in base_order + new_ids)
    return MappingTable(m.source_space, m.target_space, entries)


def projected_class_count(m: MappingTable) -> int:
    """Number of distinct non-void target ids the mapping lands on."""
    targets = {t for _, t in m.entries}
    targets.discard(m.target_space.void_id)
    return len(targets)


def build_lut(m: MappingTable) -> ProjectionLUT:
    """Compile a mapping into a dense per-source-id lookup table.

    The table spans [0, max source id] of the *source space* (not just of
    the entries), so an empty mapping still yields an all-void table of
    the right length.
    """
    length = m.source_space.max_id + 1
    table = np.full(length, VOID_SENTINEL, dtype=np.int32)
    for s, t in m.entries:
        table[s] = t
    return ProjectionLUT(
        table=table,
        source=m.source,
        target=m.target,
        target_void=m.target_space.void_id,
    )


def _mask_dtype(space: LabelSpace) -> type:
    return np.uint8 if space.max_id <= 255 else np.uint16


def project_mask(mask: MaskImage, lut: ProjectionLUT, target: LabelSpace) -> MaskImage:
    """Remap every pixel through the lookup table.

    Pixels whose source id has no mapping become the target space's void
    class. Dimensions are preserved.

    Raises:
        DataError: if a pixel value exceeds the table (reporting the first
            offending coordinate), or if void output is needed but the
            target space has no void class.
    """
    data = mask.data
    if data.size and int(data.max()) >= len(lut.table):
        bad = np.argwhere(data >= len(lut.table))[0]
        y, x = int(bad[0]), int(bad[1])
        raise DataError(
            f"mask pixel ({x}, {y}) has value {int(data[y, x])}, "
            f"outside the {lut.source!r} lookup table of length {len(lut.table)}"
        )
    out = lut.table[data]
    void = out == VOID_SENTINEL
    if void.any():
        if target.void_id is None:
            raise DataError(
                f"projection into {target.name!r} produced unmapped pixels "
                "but the space has no void class"
            )
        out[void] = target.void_id
    return MaskImage(out.astype(_mask_dtype(target)), space=target.name)


def invert_mapping(m: MappingTable, policy: str = "first-listed") -> MappingTable:
    """Invert a many-to-one mapping for back-projection.

    Target ids with exactly one preimage invert to it. Collisions resolve
    per policy:

    * ``strict``: raise, listing the colliding target ids.
    * ``first-listed``: the lowest source id wins (deterministic default).
    * ``to-void``: collisions map to the original source space's void id.

    Target ids with no preimage get no entry; projecting through the
    inverse sends them to the destination space's void class.
    """
    if policy not in ("strict", "first-listed", "to-void"):
        raise ValueError(f"unknown inversion policy {policy!r}")
    preimages: dict[int, list[int]] = {}
    for s, t in m.entries:
        preimages.setdefault(t, []).append(s)
    collisions = sorted(t for t, ss in preimages.items() if len(ss) > 1)
    if policy == "strict" and collisions:
        raise InversionError(
            f"mapping {m.source}->{m.target} is not invertible; "
            f"colliding target ids: {collisions}"
        )
    entries: list[tuple[int, int]] = []
    for t in sorted(preimages):
        ss = preimages[t]
        if len(ss) == 1:
            entries.append((t, ss[0]))
        elif policy == "first-listed":
            entries.append((t, min(ss)))
        else:  # to-void
            if m.source_space.void_id is None:
                raise InversionError(
                    f"to-void inversion needs a void class in {m.source!r}, "
                    f"none declared (colliding target ids: {collisions})"
                )
            entries.append((t, m.source_space.void_id))
    return MappingTable(m.target_space, m.source_space, tuple(entries))


def validate_mapping(m: MappingTable, source: LabelSpace, target: LabelSpace) -> MappingReport:
    """Diagnose a mapping against a pair of spaces without raising.

    Reports unmapped source classes, the distinct non-void target count,
    collision groups (target id -> its preimages), and any entries whose
    ids are unknown to the given spaces. ``ok`` is True iff there are no
    unknown ids.
    """
    unknown: list[str] = []
    for s, t in m.entries:
        if s not in source.ids:
            unknown.append(f"source id {s} not in {source.name!r}")
        if t not in target.ids:
            unknown.append(f"target id {t} not in {target.name!r}")
    mapped = {s for s, _ in m.entries}
    unmapped = tuple(sorted(source.ids - mapped))
    preimages: dict[int, list[int]] = {}
    for s, t in m.entries:
        preimages.setdefault(t, []).append(s)
    groups = {t: tuple(sorted(ss)) for t, ss in preimages.items() if len(ss) > 1}
    distinct = {t for _, t in m.entries}
    distinct.discard(target.void_id)
    return MappingReport(
        ok=not unknown,
        unmapped_source_ids=unmapped,
        distinct_target_count=len(distinct),
        collision_groups=groups,
        unknown_rows=tuple(unknown),
    )
