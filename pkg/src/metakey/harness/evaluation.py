"""Per-season few-shot evaluation of a selected checkpoint."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import torch

from ..baseline import finetune_baseline
from ..determinism import STREAM_EVALUATION, rng_for, stable_hash
from ..errors import CheckpointError, ConfigError
from ..kpnet import KeypointNet, PerStepBNStats, coordinate_scale, image_batch, label_batch
from ..metacore import MODES, test_time_adapt
from ..taskdata import Sample, Season, Split, Task
from .checkpoint import Checkpoint

logger = logging.getLogger(__name__)

ARM_NAMES = ("no_finetune", "baseline_ft", "meta_adapt")
SEASON_ORDER = (Season.EARLY, Season.LATE, Season.VERY_LATE)


@dataclass(frozen=True)
class Arm:
    """One evaluation arm: whether and how the checkpoint adapts per day.

    ``no_finetune`` scores the checkpoint as-is (any mode); ``baseline_ft``
    runs plain gradient descent at a fixed rate (conventional checkpoints
    only); ``meta_adapt`` runs the learned inner loop (meta checkpoints only).
    """

    name: str
    lr: float | None = None
    steps: int | None = None

    def __post_init__(self) -> None:
        if self.name not in ARM_NAMES:
            raise ConfigError(f"unknown arm {self.name!r}; expected one of {ARM_NAMES}")
        if self.name == "baseline_ft" and (self.lr is None or self.lr < 0):
            raise ConfigError("baseline_ft needs a non-negative --lr")
        if self.steps is not None and self.steps < 0:
            raise ConfigError("steps must be >= 0")

    def label(self) -> str:
        if self.name == "no_finetune":
            return "no finetune"
        if self.name == "baseline_ft":
            return f"finetune lr={self.lr:g}"
        return "meta adapt"


@dataclass
class SeasonScore:
    mean: float
    std: float
    per_run: list[float]
    days: int
    images: int


@dataclass
class EvalReport:
    """Everything one report row needs, plus provenance."""

    train_label: str
    model_label: str
    mode: str
    arm: Arm
    k: int
    steps: int
    runs: int
    seed: int
    checkpoint_index: int
    weighting: str
    seasons: dict[str, SeasonScore] = field(default_factory=dict)


def _adapts(arm: Arm, steps: int) -> bool:
    return arm.name != "no_finetune" and steps > 0


def _check_arm_against_mode(arm: Arm, ckpt: Checkpoint) -> None:
    if arm.name == "baseline_ft" and ckpt.is_meta:
        raise CheckpointError(
            f"checkpoint was meta-trained ({ckpt.mode!r}); fixed-rate finetuning "
            "would silently drop its learned per-layer rates — use the meta_adapt arm"
        )
    if arm.name == "meta_adapt" and not ckpt.is_meta:
        raise CheckpointError(
            "checkpoint was trained conventionally; it carries no learned rates, "
            "so the meta_adapt arm cannot run — use no_finetune or baseline_ft"
        )


def _resolve_steps(arm: Arm, ckpt: Checkpoint) -> int:
    if arm.name == "no_finetune":
        return 0
    if arm.steps is not None:
        return arm.steps
    if ckpt.is_meta:
        return int(ckpt.training_config["inner_steps"])
    return int(ckpt.training_config["finetune_steps"])


def _pixel_losses(
    net: KeypointNet,
    weights: dict[str, torch.Tensor],
    bn: PerStepBNStats,
    samples: list[Sample],
    step: int,
    batch_size: int = 64,
) -> torch.Tensor:
    """Per-image pixel-space loss (sum of absolute coordinate errors)."""
    chunks = []
    scale = coordinate_scale(net.config)
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start : start + batch_size]
            pred = net.forward(weights, image_batch(chunk), bn, step=step, accumulate=False)
            pred_px = pred.coords * scale.to(pred.coords.dtype)
            target_px = label_batch(chunk, pred.coords.dtype)
            chunks.append((pred_px - target_px).abs().sum(dim=-1))
    return torch.cat(chunks)


def _adapted_weights(
    arm: Arm,
    ckpt: Checkpoint,
    net: KeypointNet,
    support: list[Sample],
    steps: int,
) -> dict[str, torch.Tensor]:
    if arm.name == "baseline_ft":
        result = finetune_baseline(
            net, ckpt.bn, ckpt.weights, support, lr=arm.lr, steps=steps
        )
        if result.diverged:
            logger.warning(
                "finetune at lr=%g diverged after %d step(s); scoring the last "
                "finite weights", arm.lr, result.steps_taken,
            )
        return result.weights
    return test_time_adapt(
        ckpt.weights, ckpt.rates, ckpt.bn, net, support,
        mode=ckpt.mode, steps=steps, expected_k=int(ckpt.training_config.get("k", len(support))),
    )


def evaluate(
    ckpt: Checkpoint,
    test_split: Split,
    *,
    arm: Arm,
    k: int,
    runs: int,
    seed: int,
    train_label: str = "train",
    weighting: str = "image",
) -> EvalReport:
    """Score one checkpoint/arm across the test split's seasons.

    Per run and test day, ``k`` support images are drawn (adapting arms),
    the model adapts, and the day's remaining images are scored in pixel
    space; support draws never contribute to the score. The season value is
    the image-count-weighted mean over its days (or the unweighted day mean
    under ``weighting="day"``), and mean ± std (population) is taken over
    ``runs`` draws. Non-adapting arms are a single deterministic pass, so
    their std is 0 by construction. Days with ≤ k images are excluded with
    a warning. Fixed (checkpoint, seed) input yields an identical report.
    """
    if ckpt.mode not in (*MODES, "baseline"):
        raise CheckpointError(f"checkpoint has unknown mode {ckpt.mode!r}")
    _check_arm_against_mode(arm, ckpt)
    if weighting not in ("image", "day"):
        raise ConfigError(f"unknown weighting {weighting!r}")
    steps = _resolve_steps(arm, ckpt)
    net = ckpt.build_net()

    by_season: dict[Season, list[Task]] = {}
    for task in sorted(test_split.tasks, key=lambda t: t.day_id):
        if len(task) <= k:
            logger.warning(
                "test day %s has %d image(s) and cannot spare k=%d support draws; excluded",
                task.day_id, len(task), k,
            )
            continue
        by_season.setdefault(task.season, []).append(task)

    adapts = _adapts(arm, steps)
    seasons: dict[str, SeasonScore] = {}
    for season in SEASON_ORDER:
        tasks = by_season.get(season)
        if not tasks:
            continue
        per_run: list[float] = []
        effective_runs = runs if adapts else 1
        for run in range(effective_runs):
            day_losses: list[float] = []
            day_counts: list[int] = []
            for task in tasks:
                if adapts:
                    rng = rng_for(seed, STREAM_EVALUATION, run, stable_hash(task.day_id))
                    chosen = rng.choice(len(task.samples), size=k, replace=False)
                    chosen_set = set(int(i) for i in chosen)
                    support = [task.samples[i] for i in sorted(chosen_set)]
                    scoring = [s for i, s in enumerate(task.samples) if i not in chosen_set]
                    weights = _adapted_weights(arm, ckpt, net, support, steps)
                    score_step = min(steps, ckpt.bn.num_steps) - 1
                else:
                    scoring = task.samples
                    weights = ckpt.weights
                    score_step = 0
                losses = _pixel_losses(net, weights, ckpt.bn, scoring, score_step)
                day_losses.append(float(losses.mean()))
                day_counts.append(len(scoring))
            if weighting == "image":
                total = sum(day_counts)
                per_run.append(sum(n * l for n, l in zip(day_counts, day_losses)) / total)
            else:
                per_run.append(sum(day_losses) / len(day_losses))
        if not adapts:
            per_run = per_run * runs
        mean = sum(per_run) / len(per_run)
        variance = sum((x - mean) ** 2 for x in per_run) / len(per_run)
        seasons[season.value] = SeasonScore(
            mean=mean,
            std=variance ** 0.5,
            per_run=per_run,
            days=len(tasks),
            images=sum(len(t) for t in tasks),
        )

    model_label = f"{ckpt.mode} {arm.label()}" if ckpt.mode == "baseline" else f"{ckpt.mode} ({arm.label()})"
    return EvalReport(
        train_label=train_label,
        model_label=model_label,
        mode=ckpt.mode,
        arm=arm,
        k=k,
        steps=steps,
        runs=runs,
        seed=seed,
        checkpoint_index=ckpt.index,
        weighting=weighting,
        seasons=seasons,
    )
