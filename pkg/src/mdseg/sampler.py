"""Dataset balancing and the deterministic two-phase training schedule.

Balancing repeats each dataset ``max(1, floor(target / len(dataset)))``
times in the sampling pool, with a 120k target, so small datasets are
seen far more often per epoch than they would be under plain
concatenation. Scheduling runs 80k iterations at batch 64 in two phases:
the first half excludes the BDD and IDD datasets, the second half draws
from all nine.

Within a phase, the pool is the concatenation of every included dataset's
manifest repeated its factor times (datasets in name order, each sample
index tiled factor times), shuffled by the Philox stream
``(seed, STREAM_SCHEDULE, phase_index, cycle)``. Batches are consecutive
slices of that shuffle; when the pool is exhausted the cycle counter
increments and the pool is reshuffled. Batch contents are therefore a
pure function of (manifest sizes, repeat plan, phases, batch size, seed).

Optimizer hyperparameters travel along as inert metadata: they are
written into plan files for the training system to consume but are never
interpreted here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ScheduleError
from .rng import STREAM_SCHEDULE, RngStream

DEFAULT_TARGET_SIZE = 120_000
DEFAULT_TOTAL_ITERS = 80_000
DEFAULT_BATCH_SIZE = 64
FIRST_HALF_EXCLUDED = frozenset({"BDD", "IDD"})


def repeat_factor(target: int, n: int) -> int:
    """max(1, floor(target / n)): how many times an n-sample dataset repeats."""
    if n <= 0:
        raise ValueError(f"dataset size must be >= 1, got {n}")
    return max(1, target // n)


@dataclass(frozen=True)
class RepeatPlan:
    target_size: int
    factors: Mapping[str, int]


def build_repeat_plan(catalog, target: int = DEFAULT_TARGET_SIZE) -> RepeatPlan:
    """Compute repeat factors for a catalog.

    ``catalog`` is either a mapping of dataset name to train-set size or
    an iterable of descriptors with ``name`` / ``train_count``.
    """
    if isinstance(catalog, Mapping):
        sizes = dict(catalog)
    else:
        sizes = {d.name: d.train_count for d in catalog}
    if not sizes:
        raise ValueError("catalog is empty")
    return RepeatPlan(target, {name: repeat_factor(target, n) for name, n in sizes.items()})


@dataclass(frozen=True)
class PhaseSpec:
    """Half-open iteration range and the datasets eligible within it."""

    start_iter: int
    end_iter: int
    included_datasets: frozenset[str]

    def __post_init__(self):
        if not (0 <= self.start_iter < self.end_iter):
            raise ValueError(f"bad phase range [{self.start_iter}, {self.end_iter})")

    def __contains__(self, it: int) -> bool:
        return self.start_iter <= it < self.end_iter


def default_phases(
    dataset_names: Sequence[str],
    total_iters: int = DEFAULT_TOTAL_ITERS,
    excluded_first_half: frozenset[str] = FIRST_HALF_EXCLUDED,
) -> tuple[PhaseSpec, PhaseSpec]:
    """First half without the late-phase datasets, second half with everything."""
    names = frozenset(dataset_names)
    mid = total_iters // 2
    return (
        PhaseSpec(0, mid, names - excluded_first_half),
        PhaseSpec(mid, total_iters, names),
    )


def _validate_phases(phases: Sequence[PhaseSpec], total_iters: int) -> tuple[PhaseSpec, ...]:
    ordered = tuple(sorted(phases, key=lambda p: p.start_iter))
    cursor = 0
    for p in ordered:
        if p.start_iter != cursor:
            raise ScheduleError(
                f"phases must tile [0, {total_iters}) without gaps or overlap; "
                f"expected a phase starting at {cursor}, got {p.start_iter}"
            )
        cursor = p.end_iter
    if cursor != total_iters:
        raise ScheduleError(f"phases end at {cursor}, expected {total_iters}")
    return ordered


@dataclass(frozen=True)
class TrainingMeta:
    """Optimizer settings carried verbatim into plan files, never executed."""

    optimizer: str = "AdamW"
    learning_rate: float = 6e-5
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    lr_schedule: str = "poly"
    warmup_iters: int = 1500

    def to_dict(self) -> dict:
        return {
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "betas": list(self.betas),
            "lr_schedule": self.lr_schedule,
            "warmup_iters": self.warmup_iters,
        }


DEFAULT_TRAINING_META = TrainingMeta()


@dataclass(frozen=True)
class BatchSpec:
    """The (dataset, manifest index) pairs drawn at one iteration."""

    iter: int
    items: tuple[tuple[str, int], ...]


@dataclass
class TrainSchedule:
    """Immutable-after-build schedule; query batches with next_batch().

    Pool permutations are derived lazily per (phase, cycle) and cached,
    so constructing a full-scale schedule is cheap and batch queries in
    iteration order touch each shuffle once.
    """

    phases: tuple[PhaseSpec, ...]
    total_iters: int
    batch_size: int
    seed: int
    repeat_plan: RepeatPlan
    sizes: Mapping[str, int]
    meta: TrainingMeta = DEFAULT_TRAINING_META
    _pools: dict = field(default_factory=dict, repr=False)
    _perms: dict = field(default_factory=dict, repr=False)

    @property
    def total_items(self) -> int:
        return self.total_iters * self.batch_size

    def _pool(self, phase_idx: int):
        """(dataset code array, sample index array, name list) for a phase."""
        if phase_idx in self._pools:
            return self._pools[phase_idx]
        phase = self.phases[phase_idx]
        names = sorted(phase.included_datasets)
        codes = []
        indices = []
        for code, name in enumerate(names):
            n = self.sizes.get(name, 0)
            if n <= 0:
                continue
            f = self.repeat_plan.factors[name]
            indices.append(np.tile(np.arange(n, dtype=np.int64), f))
            codes.append(np.full(n * f, code, dtype=np.int32))
        if not codes:
            raise ScheduleError(
                f"phase [{phase.start_iter}, {phase.end_iter}) has an empty sample pool"
            )
        pool = (np.concatenate(codes), np.concatenate(indices), names)
        self._pools[phase_idx] = pool
        return pool

    def _perm(self, phase_idx: int, cycle: int, pool_len: int) -> np.ndarray:
        key = (phase_idx, cycle)
        if key not in self._perms:
            # keep at most the two most recent cycles per phase
            stale = [k for k in self._perms if k[0] == phase_idx and k[1] < cycle - 1]
            for k in stale:
                del self._perms[k]
            rng = RngStream(self.seed, STREAM_SCHEDULE, phase_idx, cycle)
            self._perms[key] = rng.permutation(pool_len)
        return self._perms[key]

    def phase_index(self, it: int) -> int:
        for i, p in enumerate(self.phases):
            if it in p:
                return i
        raise ValueError(f"iteration {it} outside [0, {self.total_iters})")


def build_schedule(
    manifests,
    plan: RepeatPlan,
    phases: Sequence[PhaseSpec] | None = None,
    total_iters: int = DEFAULT_TOTAL_ITERS,
    batch_size: int = DEFAULT_BATCH_SIZE,
    seed: int = 0,
    meta: TrainingMeta = DEFAULT_TRAINING_META,
) -> TrainSchedule:
    """Assemble and validate a schedule.

    ``manifests`` maps dataset name to either a manifest-like object with
    ``__len__`` or a plain sample count.

    Raises:
        ScheduleError: phases that do not tile [0, total_iters), a phase
            whose datasets have no samples or no repeat factor.
    """
    sizes = {name: int(m) if isinstance(m, int) else len(m) for name, m in manifests.items()}
    if phases is None:
        phases = default_phases(sizes.keys(), total_iters)
    ordered = _validate_phases(phases, total_iters)
    for p in ordered:
        for name in p.included_datasets:
            if name not in sizes:
                raise ScheduleError(f"phase references dataset {name!r} with no manifest")
            if name not in plan.factors:
                raise ScheduleError(f"dataset {name!r} missing from the repeat plan")
        if not any(sizes.get(n, 0) > 0 for n in p.included_datasets):
            raise ScheduleError(
                f"phase [{p.start_iter}, {p.end_iter}) has an empty sample pool"
            )
    return TrainSchedule(
        phases=ordered,
        total_iters=total_iters,
        batch_size=batch_size,
        seed=seed,
        repeat_plan=plan,
        sizes=sizes,
        meta=meta,
    )


def next_batch(s: TrainSchedule, it: int) -> BatchSpec:
    """The batch drawn at iteration ``it``; pure in (schedule, it)."""
    if not 0 <= it < s.total_iters:
        raise ValueError(f"iteration {it} outside [0, {s.total_iters})")
    phase_idx = s.phase_index(it)
    phase = s.phases[phase_idx]
    codes, indices, names = s._pool(phase_idx)
    pool_len = len(codes)
    start = (it - phase.start_iter) * s.batch_size
    items = []
    for g in range(start, start + s.batch_size):
        cycle, pos = divmod(g, pool_len)
        j = s._perm(phase_idx, cycle, pool_len)[pos]
        items.append((names[codes[j]], int(indices[j])))
    return BatchSpec(iter=it, items=tuple(items))


def plan_to_json(s: TrainSchedule) -> str:
    """Canonical plan-file serialization; byte-identical for equal inputs."""
    doc = {
        "seed": s.seed,
        "total_iters": s.total_iters,
        "batch_size": s.batch_size,
        "phases": [
            {
                "start": p.start_iter,
                "end": p.end_iter,
                "datasets": sorted(p.included_datasets),
            }
            for p in s.phases
        ],
        "repeat_factors": {k: s.repeat_plan.factors[k] for k in sorted(s.repeat_plan.factors)},
        "training_meta": s.meta.to_dict(),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def batch_to_json(b: BatchSpec) -> str:
    return json.dumps(
        {"iter": b.iter, "items": [[d, i] for d, i in b.items]}, separators=(",", ":")
    )
