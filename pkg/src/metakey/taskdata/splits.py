"""Split construction and the deterministic within-day sample partition."""

from __future__ import annotations

import numpy as np

from ..determinism import stable_hash
from ..errors import SplitError
from .types import PORTIONS, Season, Split, SplitSpec, Task, TaskCollection

#: Within-day partition fractions for (train, val, test).
PARTITION_FRACTIONS = (0.70, 0.15, 0.15)


def partition_day_samples(task: Task, fractions: tuple[float, float, float] = PARTITION_FRACTIONS) -> dict[str, list[int]]:
    """Deterministically split a day's sample indices into train/val/test.

    The shuffle is keyed on the day id alone, so every experiment sees the
    same partition for a given day regardless of its own seed.
    """
    rng = np.random.default_rng([stable_hash("partition"), stable_hash(task.day_id)])
    perm = rng.permutation(len(task))
    n_train = int(len(task) * fractions[0])
    n_val = int(len(task) * fractions[1])
    return {
        "train": sorted(perm[:n_train].tolist()),
        "val": sorted(perm[n_train:n_train + n_val].tolist()),
        "test": sorted(perm[n_train + n_val:].tolist()),
    }


def make_split(collection: TaskCollection, spec: SplitSpec) -> Split:
    """Realize a split spec against a loaded collection.

    Unknown days fail immediately; if the spec declares a season composition
    the realized counts must match it exactly.
    """
    missing = sorted(d for d in spec.day_ids if d not in collection)
    if missing:
        raise SplitError(f"split {spec.name!r}: days not in collection: {missing}")

    tasks: list[Task] = []
    for day_id in sorted(spec.day_ids):
        task = collection[day_id]
        if spec.portion is not None:
            idx = partition_day_samples(task)[spec.portion]
            task = Task(day_id=task.day_id, season=task.season,
                        samples=[task.samples[i] for i in idx])
        tasks.append(task)

    split = Split(name=spec.name, tasks=tasks, portion=spec.portion)

    if spec.composition is not None:
        found = split.season_composition()
        declared = {s: c for s, c in spec.composition.items() if c != (0, 0)}
        if declared != found:
            def fmt(comp: dict[Season, tuple[int, int]]) -> str:
                return ", ".join(
                    f"{s.value}: {d} days/{i} images" for s, (d, i) in sorted(comp.items(), key=lambda kv: kv[0].value)
                ) or "(empty)"
            raise SplitError(
                f"split {spec.name!r} composition mismatch: expected {fmt(declared)}; found {fmt(found)}"
            )
    return split


def assert_split_integrity(splits: dict[str, Split]) -> None:
    """Check that no image can appear in two splits.

    Distinct splits may only share a day when both select different
    within-day portions; otherwise their day sets must be disjoint.
    """
    names = sorted(splits)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            shared = set(splits[a].day_ids) & set(splits[b].day_ids)
            if not shared:
                continue
            pa, pb = splits[a].portion, splits[b].portion
            if pa is None or pb is None or pa == pb:
                raise SplitError(
                    f"splits {a!r} and {b!r} share days {sorted(shared)} without "
                    f"disjoint within-day portions (portions: {pa!r} vs {pb!r})"
                )
