"""Experiment configuration: sectioned key-value files, resolved and hashed."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from ..baseline import BaselineConfig
from ..errors import ConfigError
from ..kpnet import ModelConfig
from ..metacore import MODES, MetaConfig
from ..taskdata import PORTIONS, SplitSpec, TaskCollection, load_manifest, make_split

TRAIN_MODES = (*MODES, "baseline")
SEASON_WEIGHTINGS = ("image", "day")

_EXPERIMENT_KEYS = {
    "mode", "seed", "out_dir", "validation_interval", "val_episodes",
    "runs", "train_label", "season_weighting",
}


@dataclass(frozen=True)
class SplitSection:
    """One ``[split.<name>]`` config section: a day list and optional portion."""

    name: str
    days: tuple[str, ...]
    portion: str | None = None

    def spec(self) -> SplitSpec:
        return SplitSpec(name=self.name, day_ids=frozenset(self.days), portion=self.portion)


@dataclass
class ExperimentConfig:
    """Everything one training-or-evaluation run needs, fully resolved."""

    mode: str
    seed: int
    out_dir: Path
    manifest: Path
    manifest_raw: str
    splits: dict[str, SplitSection]
    model: ModelConfig
    meta: MetaConfig
    baseline: BaselineConfig
    validation_interval: int | None = None
    val_episodes: int = 8
    runs: int = 3
    train_label: str = "train"
    season_weighting: str = "image"
    source_path: Path | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.mode not in TRAIN_MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {TRAIN_MODES}")
        if self.validation_interval is not None and self.validation_interval < 1:
            raise ConfigError("validation_interval must be >= 1")
        if self.val_episodes < 1:
            raise ConfigError("val_episodes must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.season_weighting not in SEASON_WEIGHTINGS:
            raise ConfigError(
                f"season_weighting must be one of {SEASON_WEIGHTINGS}, got {self.season_weighting!r}"
            )

    @property
    def is_meta(self) -> bool:
        return self.mode in MODES

    def effective_validation_interval(self) -> int:
        """250 episodes for meta modes, every epoch for the baseline."""
        if self.validation_interval is not None:
            return self.validation_interval
        return 250 if self.is_meta else 1

    def run_dir(self) -> Path:
        return self.out_dir / f"{self.mode}_s{self.seed}"

    def canonical_lines(self) -> list[str]:
        """The identity of this experiment as sorted ``key=value`` lines.

        Output location and evaluation run count are reproducibility-neutral
        and deliberately excluded; the training recipe, data binding, split
        layout, seed, and mode are all included.
        """
        lines = [
            f"mode={self.mode}",
            f"seed={self.seed}",
            f"manifest={self.manifest_raw}",
            f"validation_interval={self.effective_validation_interval()}",
            f"val_episodes={self.val_episodes}",
            f"season_weighting={self.season_weighting}",
        ]
        for key, value in sorted(self.model.to_mapping().items()):
            lines.append(f"model.{key}={value}")
        training = self.meta.to_mapping() if self.is_meta else self.baseline.to_mapping()
        section = "meta" if self.is_meta else "baseline"
        for key, value in sorted(training.items()):
            lines.append(f"{section}.{key}={value}")
        for name in sorted(self.splits):
            sec = self.splits[name]
            lines.append(f"split.{name}.days={','.join(sec.days)}")
            lines.append(f"split.{name}.portion={sec.portion or ''}")
        return lines

    def fingerprint(self) -> str:
        blob = "\n".join(self.canonical_lines()).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def load_collection(self) -> TaskCollection:
        """Load the manifest; image paths resolve against its directory."""
        return load_manifest(self.manifest.parent, self.manifest)

    def require_splits(self, *names: str) -> None:
        missing = [n for n in names if n not in self.splits]
        if missing:
            raise ConfigError(f"config declares no [split.{missing[0]}] section")

    def build_split(self, name: str, collection: TaskCollection):
        self.require_splits(name)
        return make_split(collection, self.splits[name].spec())


def _parse_days(raw: str, section: str) -> tuple[str, ...]:
    days = tuple(d for chunk in raw.split(",") for d in chunk.split() if d)
    if not days:
        raise ConfigError(f"[{section}] declares an empty day list")
    if len(set(days)) != len(days):
        raise ConfigError(f"[{section}] lists a day more than once")
    return days


def parse_config_text(
    text: str,
    *,
    base_dir: Path,
    mode: str | None = None,
    seed: int | None = None,
    source_path: Path | None = None,
) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str  # keep keys case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"malformed config: {err}") from err

    known = {"experiment", "data", "model", "meta", "baseline"}
    for section in parser.sections():
        if section not in known and not section.startswith("split."):
            raise ConfigError(f"unknown config section [{section}]")

    exp = dict(parser["experiment"]) if parser.has_section("experiment") else {}
    unknown = set(exp) - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown [experiment] option {sorted(unknown)[0]!r}")

    resolved_mode = mode if mode is not None else exp.get("mode")
    if resolved_mode is None:
        raise ConfigError("no mode given: set [experiment] mode or pass --mode")
    resolved_seed = seed if seed is not None else int(exp.get("seed", "0"))

    if not parser.has_section("data") or "manifest" not in parser["data"]:
        raise ConfigError("config needs a [data] section with a manifest path")
    manifest_raw = parser["data"]["manifest"]
    manifest = (base_dir / manifest_raw).resolve() if not Path(manifest_raw).is_absolute() else Path(manifest_raw)

    splits: dict[str, SplitSection] = {}
    for section in parser.sections():
        if not section.startswith("split."):
            continue
        name = section[len("split."):]
        if not name:
            raise ConfigError("split section needs a name: [split.<name>]")
        body = dict(parser[section])
        extra = set(body) - {"days", "portion"}
        if extra:
            raise ConfigError(f"unknown option {sorted(extra)[0]!r} in [{section}]")
        if "days" not in body:
            raise ConfigError(f"[{section}] needs a days list")
        portion = body.get("portion")
        if portion is not None and portion not in PORTIONS:
            raise ConfigError(f"[{section}]: unknown portion {portion!r}, expected one of {PORTIONS}")
        splits[name] = SplitSection(name=name, days=_parse_days(body["days"], section), portion=portion)

    model = ModelConfig.from_mapping(dict(parser["model"])) if parser.has_section("model") else ModelConfig()
    meta = MetaConfig.from_mapping(dict(parser["meta"])) if parser.has_section("meta") else MetaConfig()
    baseline = (
        BaselineConfig.from_mapping(dict(parser["baseline"]))
        if parser.has_section("baseline")
        else BaselineConfig()
    )

    out_dir_raw = exp.get("out_dir", "runs")
    out_dir = (base_dir / out_dir_raw) if not Path(out_dir_raw).is_absolute() else Path(out_dir_raw)

    interval = exp.get("validation_interval")
    return ExperimentConfig(
        mode=resolved_mode,
        seed=resolved_seed,
        out_dir=out_dir,
        manifest=manifest,
        manifest_raw=manifest_raw,
        splits=splits,
        model=model,
        meta=meta,
        baseline=baseline,
        validation_interval=int(interval) if interval is not None else None,
        val_episodes=int(exp.get("val_episodes", "8")),
        runs=int(exp.get("runs", "3")),
        train_label=exp.get("train_label", "train"),
        season_weighting=exp.get("season_weighting", "image"),
        source_path=source_path,
    )


def load_config(path: str | Path, *, mode: str | None = None, seed: int | None = None) -> ExperimentConfig:
    """Parse a config file; relative data/output paths resolve against it."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config_text(
        text, base_dir=path.parent, mode=mode, seed=seed, source_path=path
    )
