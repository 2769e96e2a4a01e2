"""Conventional (non-episodic) training of the keypoint network."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
import torch

from ..determinism import STREAM_BASELINE_EPOCH, rng_for
from ..errors import ConfigError, NonFiniteLossError
from ..kpnet import (
    KeypointNet,
    PerStepBNStats,
    image_batch,
    keypoint_loss,
    label_batch,
    to_normalized,
)
from ..metacore import AdamState
from ..taskdata import Sample, Split


@dataclass(frozen=True)
class BaselineConfig:
    """Conventional-training hyperparameters.

    Defaults follow the published recipe: Adam-style updates at 1e-4 for
    50 epochs, every image equally likely per epoch (realized as a
    without-replacement shuffle), no augmentation.
    """

    epochs: int = 50
    lr: float = 1e-4
    batch_size: int = 32
    finetune_steps: int = 3

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.finetune_steps < 0:
            raise ConfigError(f"finetune_steps must be >= 0, got {self.finetune_steps}")

    def to_mapping(self) -> dict:
        return {
            "epochs": self.epochs,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "finetune_steps": self.finetune_steps,
        }

    @classmethod
    def from_mapping(cls, mapping: dict) -> "BaselineConfig":
        kwargs = {}
        ints = {"epochs", "batch_size", "finetune_steps"}
        for key, value in mapping.items():
            if key not in cls.__dataclass_fields__:
                raise ConfigError(f"unknown baseline option {key!r}")
            kwargs[key] = int(value) if key in ints else float(value)
        return cls(**kwargs)


@dataclass
class BaselineState:
    """Everything conventional training mutates, in checkpointable form."""

    weights: dict[str, torch.Tensor]
    bn: PerStepBNStats
    adam: AdamState
    epoch: int = 0

    @classmethod
    def create(cls, net: KeypointNet, seed: int) -> "BaselineState":
        weights = net.init_params(seed)
        return cls(weights=weights, bn=net.init_bn(1), adam=AdamState.create(weights))

    def clone(self) -> "BaselineState":
        return BaselineState(
            weights={k: v.clone() for k, v in self.weights.items()},
            bn=self.bn.clone(),
            adam=self.adam.clone(),
            epoch=self.epoch,
        )


@dataclass
class BaselineSnapshot:
    """One emitted checkpoint: state copy plus its validation loss."""

    epoch: int
    state: BaselineState
    val_loss: float | None


def flat_split_samples(split: Split) -> list[Sample]:
    """All samples across days in deterministic (sorted-day) order."""
    out: list[Sample] = []
    for task in sorted(split.tasks, key=lambda t: t.day_id):
        out.extend(task.samples)
    return out


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """The shuffled visit order for one epoch; every index appears once."""
    return rng_for(seed, STREAM_BASELINE_EPOCH, epoch).permutation(n)


def dataset_loss(
    net: KeypointNet,
    weights: dict[str, torch.Tensor],
    bn: PerStepBNStats,
    samples: list[Sample],
    batch_size: int = 64,
) -> float:
    """Mean per-image loss over a sample list with frozen statistics."""
    if not samples:
        raise ValueError("cannot evaluate a loss over zero samples")
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start : start + batch_size]
            images = image_batch(chunk)
            targets = to_normalized(label_batch(chunk), net.config)
            pred = net.forward(weights, images, bn, step=0, accumulate=False)
            total += float(keypoint_loss(pred.coords, targets)) * len(chunk)
    return total / len(samples)


def run_epoch(
    net: KeypointNet,
    state: BaselineState,
    samples: list[Sample],
    cfg: BaselineConfig,
    seed: int,
) -> float:
    """One shuffled full pass; advances ``state.epoch``. Returns mean batch loss."""
    order = epoch_order(seed, state.epoch, len(samples))
    losses: list[float] = []
    for start in range(0, len(order), cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        chunk = [samples[i] for i in idx]
        images = image_batch(chunk)
        targets = to_normalized(label_batch(chunk), net.config)
        leaves = {k: v.detach().requires_grad_(True) for k, v in state.weights.items()}
        pred = net.forward(leaves, images, state.bn, step=0, accumulate=True)
        try:
            loss = keypoint_loss(pred.coords, targets)
        except NonFiniteLossError as err:
            raise NonFiniteLossError(
                f"training loss became non-finite at epoch {state.epoch}, "
                f"batch starting at index {start}"
            ) from err
        if not torch.isfinite(loss):
            raise NonFiniteLossError(
                f"training loss became non-finite at epoch {state.epoch}, "
                f"batch starting at index {start}"
            )
        grads = torch.autograd.grad(loss, list(leaves.values()), allow_unused=True)
        named_grads = dict(zip(leaves.keys(), grads))
        state.weights = state.adam.apply(state.weights, named_grads, cfg.lr)
        losses.append(float(loss.detach()))
    state.epoch += 1
    return float(np.mean(losses)) if losses else float("nan")


def train_conventional(
    net: KeypointNet,
    split: Split,
    cfg: BaselineConfig,
    seed: int,
    *,
    state: BaselineState | None = None,
    val_samples: list[Sample] | None = None,
    validation_interval: int = 1,
) -> Iterator[BaselineSnapshot]:
    """Epoch-driven training that yields a checkpoint per validation interval.

    Yields the initial (epoch-0) snapshot when starting fresh, then one
    snapshot every ``validation_interval`` epochs and always at the final
    epoch. Passing a ``state`` resumes mid-series without replaying earlier
    epochs; the per-epoch shuffle is keyed by (seed, epoch), so a resumed
    run visits the same batches the uninterrupted run would have.
    """
    if len(split.tasks) == 0 or split.num_samples() == 0:
        raise ValueError(f"split {split.name!r} has no samples to train on")
    if validation_interval < 1:
        raise ValueError("validation_interval must be >= 1")
    samples = flat_split_samples(split)

    def measure(current: BaselineState) -> float | None:
        if val_samples is None:
            return None
        return dataset_loss(net, current.weights, current.bn, val_samples, cfg.batch_size)

    if state is None:
        state = BaselineState.create(net, seed)
        yield BaselineSnapshot(epoch=0, state=state.clone(), val_loss=measure(state))
    while state.epoch < cfg.epochs:
        run_epoch(net, state, samples, cfg, seed)
        if state.epoch % validation_interval == 0 or state.epoch == cfg.epochs:
            yield BaselineSnapshot(
                epoch=state.epoch, state=state.clone(), val_loss=measure(state)
            )
