"""Core data types: labeled samples, per-day tasks, splits, episodes."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import SplitError

logger = logging.getLogger(__name__)


class Season(str, enum.Enum):
    EARLY = "early"
    LATE = "late"
    VERY_LATE = "very_late"

    @classmethod
    def parse(cls, text: str) -> "Season":
        try:
            return cls(text.strip())
        except ValueError:
            raise ValueError(
                f"unknown season {text!r}; expected one of "
                f"{[s.value for s in cls]}"
            ) from None


@dataclass(frozen=True)
class KeypointLabel:
    """Three row-following keypoints in pixel coordinates, origin top-left.

    The vanishing point is a full (x, y) position; the two lane intercepts
    are x positions on the bottom image row (y is implicit there).  Values
    may lie outside the frame: perspective geometry can push intercepts past
    the image border and no clamping is applied.
    """

    vp_x: float
    vp_y: float
    left_x: float
    right_x: float

    def __post_init__(self) -> None:
        # Plain floats keep repr() round-trippable regardless of whether the
        # caller hands us numpy scalars.
        for name in ("vp_x", "vp_y", "left_x", "right_x"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def as_vector(self) -> np.ndarray:
        return np.array([self.vp_x, self.vp_y, self.left_x, self.right_x], dtype=np.float64)

    def check(self, day_id: str = "?", image: str = "?") -> None:
        vec = self.as_vector()
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"non-finite keypoint label for day {day_id}, image {image}: {vec}")
        if self.left_x > self.right_x:
            logger.warning(
                "label for day %s image %s has left_x %.2f > right_x %.2f "
                "(invalid row geometry, kept as-is)",
                day_id, image, self.left_x, self.right_x,
            )


@dataclass
class Sample:
    """One labeled image belonging to a single recording day.

    The pixel array is either stored directly (synthetic data) or loaded
    lazily from ``image_path`` so that large manifests can be validated
    without touching pixels.
    """

    label: KeypointLabel
    day_id: str
    season: Season
    image_path: Path | None = None
    _image: np.ndarray | None = field(default=None, repr=False)

    def image(self) -> np.ndarray:
        """H x W x 3 float32 array with values in [0, 1]."""
        if self._image is None:
            if self.image_path is None:
                raise ValueError("sample has neither an in-memory image nor an image path")
            from PIL import Image

            with Image.open(self.image_path) as img:
                arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
            self._image = arr
        return self._image


@dataclass
class Task:
    """All samples recorded on one day; the unit of episodic sampling."""

    day_id: str
    season: Season
    samples: list[Sample]

    def __post_init__(self) -> None:
        for s in self.samples:
            if s.day_id != self.day_id or s.season != self.season:
                raise ValueError(
                    f"sample with day {s.day_id!r}/season {s.season.value} "
                    f"placed in task {self.day_id!r}/{self.season.value}"
                )

    def __len__(self) -> int:
        return len(self.samples)


class TaskCollection:
    """Immutable day-keyed view of a loaded dataset."""

    def __init__(self, tasks: list[Task]):
        self._tasks = {t.day_id: t for t in tasks}
        if len(self._tasks) != len(tasks):
            raise ValueError("duplicate day_id in task list")

    def __len__(self) -> int:
        return len(self._tasks)

    def __contains__(self, day_id: str) -> bool:
        return day_id in self._tasks

    def __getitem__(self, day_id: str) -> Task:
        return self._tasks[day_id]

    @property
    def day_ids(self) -> list[str]:
        return sorted(self._tasks)

    def tasks(self) -> list[Task]:
        return [self._tasks[d] for d in self.day_ids]

    def num_samples(self) -> int:
        return sum(len(t) for t in self._tasks.values())

    def season_composition(self) -> dict[Season, tuple[int, int]]:
        """Per-season (days, images) counts."""
        comp: dict[Season, tuple[int, int]] = {}
        for task in self._tasks.values():
            days, images = comp.get(task.season, (0, 0))
            comp[task.season] = (days + 1, images + len(task))
        return comp


#: Within-day portion names, in partition order.
PORTIONS = ("train", "val", "test")


@dataclass(frozen=True)
class SplitSpec:
    """Declares which days a named split contains.

    ``composition`` optionally pins the expected per-season (days, images)
    counts; construction fails if the loaded data disagrees.  ``portion``
    selects a within-day sample partition (train/val/test) instead of using
    whole days; ``None`` keeps every sample of every day.
    """

    name: str
    day_ids: frozenset[str]
    composition: dict[Season, tuple[int, int]] | None = None
    portion: str | None = None

    def __post_init__(self) -> None:
        if self.portion is not None and self.portion not in PORTIONS:
            raise SplitError(f"split {self.name!r}: unknown portion {self.portion!r}")
        if not self.day_ids:
            raise SplitError(f"split {self.name!r} declares no days")


@dataclass
class Split:
    """A realized split: tasks (possibly portion-filtered) plus bookkeeping."""

    name: str
    tasks: list[Task]
    portion: str | None = None

    def __len__(self) -> int:
        return len(self.tasks)

    def num_samples(self) -> int:
        return sum(len(t) for t in self.tasks)

    @property
    def day_ids(self) -> list[str]:
        return [t.day_id for t in self.tasks]

    def season_composition(self) -> dict[Season, tuple[int, int]]:
        comp: dict[Season, tuple[int, int]] = {}
        for task in self.tasks:
            days, images = comp.get(task.season, (0, 0))
            comp[task.season] = (days + 1, images + len(task))
        return comp

    def by_season(self) -> dict[Season, list[Task]]:
        grouped: dict[Season, list[Task]] = {}
        for task in self.tasks:
            grouped.setdefault(task.season, []).append(task)
        return grouped


@dataclass
class EpisodeEntry:
    """One task's contribution to a meta-batch."""

    day_id: str
    support: list[Sample]
    query: list[Sample]


@dataclass
class EpisodeBatch:
    """A meta-batch of disjoint support/query draws, one entry per task."""

    entries: list[EpisodeEntry]

    @property
    def meta_batch_size(self) -> int:
        return len(self.entries)
