"""Procedural crop-row image generator with exact keypoint labels.

Scene geometry (vanishing point, lane intercepts, row spacing, camera yaw)
is drawn from one random stream and rendering noise (soil texture, canopy
blobs, clutter, pixel noise) from another, so labels depend on geometry
alone: re-rendering the same geometry under a different noise seed yields
bit-identical labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..errors import GeometryError, SamplingError
from .manifest import write_manifest
from .types import KeypointLabel, Sample, Season, Task, TaskCollection

#: Minimum L2 distance between two regimes' mean RGB vectors for them to
#: count as a measurable domain shift.
CHANNEL_SHIFT_THRESHOLD = 0.05

_PARALLEL_TOL = 1e-9


class Point(NamedTuple):
    x: float
    y: float


class Line(NamedTuple):
    """Infinite 2D line through two distinct points."""

    p1: Point
    p2: Point

    def x_at_y(self, y: float) -> float:
        dy = self.p2.y - self.p1.y
        if dy == 0.0:
            raise GeometryError("horizontal line never meets the bottom image row")
        t = (y - self.p1.y) / dy
        return self.p1.x + t * (self.p2.x - self.p1.x)


def line(x1: float, y1: float, x2: float, y2: float) -> Line:
    return Line(Point(x1, y1), Point(x2, y2))


def synth_keypoints(left_line: Line, right_line: Line, image_size: tuple[int, int]) -> KeypointLabel:
    """Intersect the two lane edges and read off the three keypoints.

    The vanishing point is the line intersection; each intercept is the
    line's x at the bottom pixel row y = H - 1.  No clamping: intercepts
    may fall outside [0, W - 1].
    """
    height, _width = image_size
    d1x = left_line.p2.x - left_line.p1.x
    d1y = left_line.p2.y - left_line.p1.y
    d2x = right_line.p2.x - right_line.p1.x
    d2y = right_line.p2.y - right_line.p1.y
    det = d1x * d2y - d1y * d2x
    scale = math.hypot(d1x, d1y) * math.hypot(d2x, d2y)
    if scale == 0.0 or abs(det) <= _PARALLEL_TOL * scale:
        raise GeometryError("row lines are parallel or coincident; no vanishing point")

    rx = right_line.p1.x - left_line.p1.x
    ry = right_line.p1.y - left_line.p1.y
    t = (rx * d2y - ry * d2x) / det
    vp_x = left_line.p1.x + t * d1x
    vp_y = left_line.p1.y + t * d1y

    bottom = float(height - 1)
    return KeypointLabel(
        vp_x=vp_x,
        vp_y=vp_y,
        left_x=left_line.x_at_y(bottom),
        right_x=right_line.x_at_y(bottom),
    )


@dataclass(frozen=True)
class SynthParams:
    """One season regime's rendering parameter bundle."""

    season: Season
    image_height: int = 128
    image_width: int = 128
    row_color: tuple[float, float, float] = (0.20, 0.52, 0.18)
    row_color_jitter: float = 0.04
    soil_color: tuple[float, float, float] = (0.46, 0.34, 0.22)
    soil_texture_scale: int = 8
    canopy_occlusion: float = 0.05
    lighting_gain: float = 1.0
    clutter_density: float = 0.08
    row_spacing: float = 56.0
    yaw_jitter_deg: float = 6.0
    row_width_frac: float = 0.22
    # Day-level appearance spread: one draw per day, shared by all of the
    # day's images, so that days are distinguishable recording conditions
    # rather than interchangeable seeds.  All zero = identical-looking days.
    day_lighting_jitter: float = 0.0
    day_color_jitter: float = 0.0
    day_canopy_jitter: float = 0.0
    day_width_jitter: float = 0.0
    day_clutter_jitter: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.canopy_occlusion <= 1.0:
            raise ValueError("canopy_occlusion must lie in [0, 1]")
        if self.row_spacing <= 2.0:
            raise ValueError("row_spacing too small for valid lane geometry")
        for name in ("day_lighting_jitter", "day_color_jitter", "day_canopy_jitter",
                     "day_width_jitter", "day_clutter_jitter"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")


def builtin_regime(name: str, image_size: int = 128) -> SynthParams:
    """Named season regimes with visibly shifted image statistics.

    ``early``: thin bright-green rows on light dry soil, little canopy.
    ``late``: wide dark-green rows, damp soil, dense canopy.
    ``very_late``: senesced yellow rows, dim light, heavy canopy/clutter.

    Each regime also spreads its days out (lighting, hue, canopy, row width,
    clutter vary day to day around the regime base), because a recording day
    is a bundle of shared conditions — that per-day structure is what makes
    few-shot adaptation to a day meaningful.
    """
    spacing = 0.44 * image_size
    common = dict(
        image_height=image_size, image_width=image_size, row_spacing=spacing,
        day_lighting_jitter=0.22, day_color_jitter=0.09,
        day_width_jitter=0.38, day_clutter_jitter=0.7,
    )
    regimes = {
        "early": SynthParams(
            season=Season.EARLY,
            row_color=(0.22, 0.56, 0.20), row_color_jitter=0.04,
            soil_color=(0.50, 0.38, 0.25), soil_texture_scale=8,
            canopy_occlusion=0.04, lighting_gain=1.05, clutter_density=0.05,
            yaw_jitter_deg=6.0, row_width_frac=0.16, day_canopy_jitter=0.04,
            **common,
        ),
        "late": SynthParams(
            season=Season.LATE,
            row_color=(0.10, 0.34, 0.11), row_color_jitter=0.05,
            soil_color=(0.30, 0.22, 0.15), soil_texture_scale=6,
            canopy_occlusion=0.30, lighting_gain=0.90, clutter_density=0.12,
            yaw_jitter_deg=6.0, row_width_frac=0.42, day_canopy_jitter=0.10,
            **common,
        ),
        "very_late": SynthParams(
            season=Season.VERY_LATE,
            row_color=(0.58, 0.50, 0.20), row_color_jitter=0.06,
            soil_color=(0.34, 0.27, 0.19), soil_texture_scale=5,
            canopy_occlusion=0.45, lighting_gain=0.72, clutter_density=0.20,
            yaw_jitter_deg=6.0, row_width_frac=0.46, day_canopy_jitter=0.10,
            **common,
        ),
    }
    try:
        return regimes[name]
    except KeyError:
        raise ValueError(f"unknown regime {name!r}; built-ins: {sorted(regimes)}") from None


@dataclass(frozen=True)
class _SceneGeometry:
    vp_x: float
    vp_y: float
    lane_center: float
    spacing: float


def _draw_geometry(params: SynthParams, rng: np.random.Generator) -> _SceneGeometry:
    height, width = params.image_height, params.image_width
    for _ in range(100):
        yaw = math.radians(rng.uniform(-params.yaw_jitter_deg, params.yaw_jitter_deg))
        vp_x = width / 2 + math.tan(yaw) * 0.9 * width
        vp_y = rng.uniform(0.10, 0.30) * height
        spacing = params.row_spacing * rng.uniform(0.85, 1.15)
        lane_center = width / 2 + rng.uniform(-0.25, 0.25) * spacing
        geom = _SceneGeometry(vp_x=vp_x, vp_y=vp_y, lane_center=lane_center, spacing=spacing)
        if _geometry_lines_valid(geom, height):
            return geom
    raise SamplingError("could not draw valid row geometry after 100 attempts")


def _geometry_lines_valid(geom: _SceneGeometry, height: int) -> bool:
    if not geom.spacing > 2.0:
        return False
    if not geom.vp_y < 0.5 * (height - 1):
        return False
    try:
        label = _geometry_label(geom, height)
    except GeometryError:
        return False
    return label.left_x < label.right_x


def _geometry_label(geom: _SceneGeometry, height: int) -> KeypointLabel:
    bottom = float(height - 1)
    left = line(geom.lane_center - geom.spacing / 2, bottom, geom.vp_x, geom.vp_y)
    right = line(geom.lane_center + geom.spacing / 2, bottom, geom.vp_x, geom.vp_y)
    return synth_keypoints(left, right, (height, 0))


def _day_variant(params: SynthParams, rng: np.random.Generator) -> SynthParams:
    """One day's rendering conditions, drawn around the regime base.

    Appearance only — geometry (and therefore every label) is untouched, so
    labels remain an exact function of the geometry stream.
    """

    def shifted(color: tuple[float, float, float], spread: float) -> tuple[float, float, float]:
        delta = rng.uniform(-spread, spread, size=3)
        return tuple(float(np.clip(c + d, 0.0, 1.0)) for c, d in zip(color, delta))

    row_color = shifted(params.row_color, params.day_color_jitter)
    soil_color = shifted(params.soil_color, params.day_color_jitter)
    gain = params.lighting_gain * float(rng.uniform(1.0 - params.day_lighting_jitter,
                                                    1.0 + params.day_lighting_jitter))
    canopy = float(np.clip(params.canopy_occlusion
                           + rng.uniform(-params.day_canopy_jitter, params.day_canopy_jitter),
                           0.0, 1.0))
    width = params.row_width_frac * float(rng.uniform(1.0 - params.day_width_jitter,
                                                      1.0 + params.day_width_jitter))
    clutter = params.clutter_density * float(rng.uniform(1.0 - params.day_clutter_jitter,
                                                         1.0 + params.day_clutter_jitter))
    return replace(
        params,
        row_color=row_color,
        soil_color=soil_color,
        lighting_gain=max(gain, 0.05),
        canopy_occlusion=canopy,
        row_width_frac=float(np.clip(width, 0.04, 0.85)),
        clutter_density=max(clutter, 0.0),
    )


def _value_noise(shape: tuple[int, int], cell: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth [-1, 1] noise from a bilinearly upsampled coarse grid."""
    h, w = shape
    cell = max(int(cell), 1)
    gh, gw = h // cell + 2, w // cell + 2
    grid = rng.uniform(-1.0, 1.0, size=(gh, gw))
    ys = np.linspace(0.0, gh - 1.0, h)
    xs = np.linspace(0.0, gw - 1.0, w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, gh - 1)
    x1 = np.minimum(x0 + 1, gw - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = grid[y0][:, x0] * (1 - fx) + grid[y0][:, x1] * fx
    bot = grid[y1][:, x0] * (1 - fx) + grid[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def _render(params: SynthParams, geom: _SceneGeometry, rng: np.random.Generator) -> np.ndarray:
    height, width = params.image_height, params.image_width
    yy = np.arange(height, dtype=np.float64)[:, None]
    xx = np.arange(width, dtype=np.float64)[None, :]
    bottom = float(height - 1)

    img = np.empty((height, width, 3), dtype=np.float64)
    texture = _value_noise((height, width), params.soil_texture_scale, rng)
    for c, base in enumerate(params.soil_color):
        img[:, :, c] = base * (1.0 + 0.22 * texture)

    # Crop rows converge at the vanishing point; the two rows bordering the
    # lane sit at lane_center +/- spacing/2, with neighbours spaced evenly.
    depth = np.clip((yy - geom.vp_y) / (bottom - geom.vp_y), 0.0, 1.0)
    row_mask = np.zeros((height, width), dtype=bool)
    half_width_bottom = 0.5 * params.row_width_frac * geom.spacing
    n_side = int(math.ceil(width / geom.spacing)) + 1
    for m in range(-n_side, n_side + 1):
        offset = m + 0.5  # rows sit half a spacing off the lane centerline
        x_bottom = geom.lane_center + offset * geom.spacing
        centers = geom.vp_x + (x_bottom - geom.vp_x) * depth
        halfw = half_width_bottom * depth
        row_mask |= np.abs(xx - centers) < halfw

    row_rgb = np.array(params.row_color)
    shade = 1.0 + params.row_color_jitter * _value_noise((height, width), max(params.soil_texture_scale // 2, 2), rng)
    img = np.where(row_mask[:, :, None], row_rgb[None, None, :] * shade[:, :, None], img)

    # Canopy: leafy blobs hugging the rows, count scaled by occlusion rate.
    n_canopy = int(round(params.canopy_occlusion * 26))
    for _ in range(n_canopy):
        m = rng.integers(-2, 3)
        t = rng.uniform(0.25, 1.0)
        x_bottom = geom.lane_center + (m + 0.5) * geom.spacing
        cx = geom.vp_x + (x_bottom - geom.vp_x) * t + rng.uniform(-0.2, 0.2) * geom.spacing
        cy = geom.vp_y + (bottom - geom.vp_y) * t
        rx = max(rng.uniform(0.08, 0.22) * geom.spacing * t, 1.0)
        ry = max(rx * rng.uniform(0.5, 0.9), 1.0)
        blob = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 < 1.0
        tint = np.array(params.row_color) * rng.uniform(0.75, 1.2)
        img = np.where(blob[:, :, None], tint[None, None, :], img)

    # Clutter: small off-row speckles (weeds, debris, stones).
    n_clutter = int(round(params.clutter_density * 40))
    for _ in range(n_clutter):
        cx = rng.uniform(0, width)
        cy = rng.uniform(geom.vp_y, bottom)
        r = rng.uniform(0.5, 2.5)
        blob = (xx - cx) ** 2 + (yy - cy) ** 2 < r ** 2
        tint = rng.uniform(0.1, 0.9, size=3)
        img = np.where(blob[:, :, None], tint[None, None, :], img)

    # Sky-to-ground lighting falloff, global gain, then sensor noise.
    vertical = 1.0 + 0.10 * (1.0 - yy / bottom)
    img *= params.lighting_gain * vertical[:, :, None]
    img += rng.normal(0.0, 0.015, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def synth_generate(
    params: SynthParams,
    n: int,
    day_id: str,
    rng: np.random.Generator,
    *,
    noise_rng: np.random.Generator | None = None,
) -> Task:
    """Render a day of ``n`` labeled samples.

    ``rng`` seeds the geometry stream; the noise stream is derived from it
    unless supplied explicitly (labels are a function of geometry only).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if noise_rng is None:
        geom_rng, noise_rng = rng.spawn(2)
    else:
        geom_rng = rng

    day_params = _day_variant(params, geom_rng)
    samples = []
    for _ in range(n):
        geom = _draw_geometry(day_params, geom_rng)
        label = _geometry_label(geom, params.image_height)
        image = _render(day_params, geom, noise_rng)
        samples.append(
            Sample(label=label, day_id=day_id, season=params.season, _image=image)
        )
    return Task(day_id=day_id, season=params.season, samples=samples)


def render_dataset(
    out_root: str | Path,
    regimes: dict[str, tuple[SynthParams, list[str], int]],
    seed: int,
    manifest_name: str = "manifest.csv",
) -> TaskCollection:
    """Render several regimes to disk and write one conforming manifest.

    ``regimes`` maps a regime label to (params, day_ids, images_per_day).
    Every day gets its own geometry/noise streams derived from ``seed`` and
    the day id, so adding days never reshuffles existing ones.
    """
    from PIL import Image

    from ..determinism import STREAM_SYNTH_GEOMETRY, STREAM_SYNTH_NOISE, rng_for, stable_hash

    root = Path(out_root)
    tasks: list[Task] = []
    for params, day_ids, images_per_day in regimes.values():
        for day_id in day_ids:
            geom_rng = rng_for(seed, STREAM_SYNTH_GEOMETRY, stable_hash(day_id))
            noise_rng = rng_for(seed, STREAM_SYNTH_NOISE, stable_hash(day_id))
            task = synth_generate(params, images_per_day, day_id, geom_rng, noise_rng=noise_rng)
            day_dir = root / day_id
            day_dir.mkdir(parents=True, exist_ok=True)
            for i, sample in enumerate(task.samples):
                path = day_dir / f"img_{i:05d}.png"
                arr = (sample.image() * 255.0).round().astype(np.uint8)
                Image.fromarray(arr).save(path)
                sample.image_path = path
            tasks.append(task)
    collection = TaskCollection(tasks)
    write_manifest(collection, root, manifest_name)
    return collection


def regime_from_mapping(mapping: dict[str, str], image_size: int | None = None) -> SynthParams:
    """Build a regime from flat config keys, starting from its named base.

    ``base`` selects a built-in regime; any other key overrides one
    :class:`SynthParams` field (colors as comma-separated RGB).
    """
    base_name = mapping.get("base", "early")
    size = int(mapping.get("image_size", image_size or 128))
    params = builtin_regime(base_name, image_size=size)
    overrides = {}
    for key, raw in mapping.items():
        if key in {"base", "image_size"}:
            continue
        if key in {"row_color", "soil_color"}:
            overrides[key] = tuple(float(v) for v in raw.split(","))
        elif key == "season":
            overrides[key] = Season.parse(raw)
        elif key == "soil_texture_scale":
            overrides[key] = int(raw)
        elif key in {"row_color_jitter", "canopy_occlusion", "lighting_gain",
                     "clutter_density", "row_spacing", "yaw_jitter_deg", "row_width_frac",
                     "day_lighting_jitter", "day_color_jitter", "day_canopy_jitter",
                     "day_width_jitter", "day_clutter_jitter"}:
            overrides[key] = float(raw)
        else:
            raise ValueError(f"unknown synthetic regime key {key!r}")
    return replace(params, **overrides)
