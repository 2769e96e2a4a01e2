import numpy as np
import pytest

from metakey.taskdata import KeypointLabel, Sample, Season, Task, TaskCollection


def make_task(day_id: str, season: Season, n: int) -> Task:
    """A day of n dummy samples; labels vary but stay finite and ordered."""
    rng = np.random.default_rng([abs(hash(day_id)) % (2**31), n])
    samples = []
    for i in range(n):
        vp_x, vp_y = rng.uniform(40, 90), rng.uniform(5, 40)
        left = rng.uniform(-30, 40)
        samples.append(
            Sample(
                label=KeypointLabel(vp_x=vp_x, vp_y=vp_y, left_x=left, right_x=left + rng.uniform(30, 120)),
                day_id=day_id,
                season=season,
                _image=np.zeros((4, 4, 3), dtype=np.float32),
            )
        )
    return Task(day_id=day_id, season=season, samples=samples)


def make_collection(days: dict[str, tuple[Season, int]]) -> TaskCollection:
    return TaskCollection([make_task(d, season, n) for d, (season, n) in days.items()])


@pytest.fixture
def tiny_collection() -> TaskCollection:
    return make_collection(
        {
            "day_a": (Season.EARLY, 30),
            "day_b": (Season.EARLY, 24),
            "day_c": (Season.LATE, 40),
            "day_d": (Season.VERY_LATE, 26),
        }
    )
