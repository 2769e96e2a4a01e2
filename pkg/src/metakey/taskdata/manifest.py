"""Dataset manifest reading and writing.

A manifest is UTF-8 CSV with the exact header
``image_path,day_id,season,vp_x,vp_y,left_x,right_x``; image paths are
relative to the dataset root, coordinates are pixels with origin top-left.
"""

from __future__ import annotations

import csv
from pathlib import Path

from ..errors import ManifestError
from .types import KeypointLabel, Sample, Season, Task, TaskCollection

MANIFEST_COLUMNS = ("image_path", "day_id", "season", "vp_x", "vp_y", "left_x", "right_x")


def load_manifest(root_path: str | Path, manifest_file: str | Path) -> TaskCollection:
    """Load a manifest into tasks grouped by day.

    Every referenced image file must exist (pixels are not read here).
    Duplicate (day_id, image_path) rows, unknown seasons, and non-finite
    coordinates are rejected with the offending row number.
    """
    root = Path(root_path)
    path = Path(manifest_file)
    if not path.is_absolute():
        path = root / path

    by_day: dict[str, list[Sample]] = {}
    day_season: dict[str, Season] = {}
    seen: set[tuple[str, str]] = set()

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest") from None
        if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise ManifestError(
                f"{path}: bad header {header!r}, expected {','.join(MANIFEST_COLUMNS)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ManifestError(f"{path}:{line_no}: expected {len(MANIFEST_COLUMNS)} fields, got {len(row)}")
            rel_path, day_id, season_text = row[0].strip(), row[1].strip(), row[2]
            try:
                season = Season.parse(season_text)
            except ValueError as exc:
                raise ManifestError(f"{path}:{line_no}: {exc}") from None
            try:
                coords = [float(v) for v in row[3:7]]
            except ValueError:
                raise ManifestError(f"{path}:{line_no}: non-numeric keypoint coordinates {row[3:7]!r}") from None

            key = (day_id, rel_path)
            if key in seen:
                raise ManifestError(f"{path}:{line_no}: duplicate entry for day {day_id!r}, image {rel_path!r}")
            seen.add(key)

            image_path = root / rel_path
            if not image_path.is_file():
                raise ManifestError(f"{path}:{line_no}: missing image file {image_path}")

            if day_id in day_season and day_season[day_id] != season:
                raise ManifestError(
                    f"{path}:{line_no}: day {day_id!r} tagged {season.value} but earlier rows say "
                    f"{day_season[day_id].value}"
                )
            day_season[day_id] = season

            label = KeypointLabel(*coords)
            try:
                label.check(day_id=day_id, image=rel_path)
            except ValueError as exc:
                raise ManifestError(f"{path}:{line_no}: {exc}") from None
            by_day.setdefault(day_id, []).append(
                Sample(label=label, day_id=day_id, season=season, image_path=image_path)
            )

    tasks = [Task(day_id=d, season=day_season[d], samples=samples) for d, samples in by_day.items()]
    return TaskCollection(tasks)


def write_manifest(collection: TaskCollection, root_path: str | Path, manifest_file: str | Path) -> Path:
    """Write a manifest for ``collection``; inverse of :func:`load_manifest`.

    Samples must carry image paths under ``root_path``.
    """
    root = Path(root_path)
    path = Path(manifest_file)
    if not path.is_absolute():
        path = root / path
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for task in collection.tasks():
            for sample in task.samples:
                if sample.image_path is None:
                    raise ManifestError(
                        f"sample of day {task.day_id!r} has no image path; render it to disk first"
                    )
                rel = sample.image_path.relative_to(root)
                lab = sample.label
                writer.writerow(
                    [rel.as_posix(), task.day_id, task.season.value,
                     repr(lab.vp_x), repr(lab.vp_y), repr(lab.left_x), repr(lab.right_x)]
                )
    return path
