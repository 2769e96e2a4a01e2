"""Conventional training and test-time finetuning comparison arms."""

from .finetune import FinetuneResult, finetune_baseline
from .training import (
    BaselineConfig,
    BaselineSnapshot,
    BaselineState,
    dataset_loss,
    epoch_order,
    flat_split_samples,
    run_epoch,
    train_conventional,
)

__all__ = [
    "BaselineConfig",
    "BaselineSnapshot",
    "BaselineState",
    "FinetuneResult",
    "dataset_loss",
    "epoch_order",
    "finetune_baseline",
    "flat_split_samples",
    "run_epoch",
    "train_conventional",
]
