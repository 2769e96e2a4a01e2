"""Dataset layer: manifests, day-keyed tasks, splits, episodes, synthesis."""

from .episodes import sample_episode, sample_task
from .manifest import MANIFEST_COLUMNS, load_manifest, write_manifest
from .splits import (
    PARTITION_FRACTIONS,
    assert_split_integrity,
    make_split,
    partition_day_samples,
)
from .synth import (
    CHANNEL_SHIFT_THRESHOLD,
    Line,
    Point,
    SynthParams,
    builtin_regime,
    line,
    regime_from_mapping,
    render_dataset,
    synth_generate,
    synth_keypoints,
)
from .types import (
    PORTIONS,
    EpisodeBatch,
    EpisodeEntry,
    KeypointLabel,
    Sample,
    Season,
    Split,
    SplitSpec,
    Task,
    TaskCollection,
)

__all__ = [
    "CHANNEL_SHIFT_THRESHOLD",
    "EpisodeBatch",
    "EpisodeEntry",
    "KeypointLabel",
    "Line",
    "MANIFEST_COLUMNS",
    "PARTITION_FRACTIONS",
    "PORTIONS",
    "Point",
    "Sample",
    "Season",
    "Split",
    "SplitSpec",
    "SynthParams",
    "Task",
    "TaskCollection",
    "assert_split_integrity",
    "builtin_regime",
    "line",
    "load_manifest",
    "make_split",
    "partition_day_samples",
    "regime_from_mapping",
    "render_dataset",
    "sample_episode",
    "sample_task",
    "synth_generate",
    "synth_keypoints",
    "write_manifest",
]
