"""Episodic sampling: day-proportional task draws and support/query splits."""

from __future__ import annotations

import numpy as np

from ..errors import SamplingError
from .types import EpisodeBatch, EpisodeEntry, Split, Task

#: Give up after this many attempts to hit a day with enough samples.
RESAMPLE_LIMIT = 100


def _day_weights(split: Split) -> np.ndarray:
    counts = np.array([len(t) for t in split.tasks], dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise SamplingError(f"split {split.name!r} has no samples")
    return counts / total


def sample_task(split: Split, rng: np.random.Generator) -> Task:
    """Draw one task; day probability is proportional to its image count."""
    if len(split) == 0:
        raise SamplingError(f"split {split.name!r} is empty")
    weights = _day_weights(split)
    idx = rng.choice(len(split.tasks), p=weights)
    return split.tasks[int(idx)]


def sample_episode(
    split: Split,
    support_size: int,
    query_size: int,
    meta_batch: int,
    rng: np.random.Generator,
) -> EpisodeBatch:
    """Draw a meta-batch of per-task support/query sets.

    Support and query are drawn without replacement from the same day, so
    they are disjoint by construction.  Days that are too small are
    resampled (bounded); if no day can satisfy the request at all the call
    fails immediately.
    """
    need = support_size + query_size
    if not any(len(t) >= need for t in split.tasks):
        raise SamplingError(
            f"no day in split {split.name!r} has >= {need} samples "
            f"(support {support_size} + query {query_size})"
        )

    entries: list[EpisodeEntry] = []
    for _ in range(meta_batch):
        task = sample_task(split, rng)
        attempts = 1
        while len(task) < need:
            if attempts >= RESAMPLE_LIMIT:
                raise SamplingError(
                    f"split {split.name!r}: gave up after {attempts} attempts to "
                    f"sample a day with >= {need} samples"
                )
            task = sample_task(split, rng)
            attempts += 1
        picked = rng.choice(len(task), size=need, replace=False)
        support = [task.samples[i] for i in picked[:support_size]]
        query = [task.samples[i] for i in picked[support_size:]]
        entries.append(EpisodeEntry(day_id=task.day_id, support=support, query=query))
    return EpisodeBatch(entries=entries)
