"""Adapter binding the keypoint network to the task-loss interface."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch

from ..kpnet import KeypointNet, PerStepBNStats, image_batch, keypoint_loss, label_batch, to_normalized
from ..taskdata import EpisodeBatch, EpisodeEntry, Sample
from .adapt import adapt_mask, inner_adapt
from .rates import InnerRateTable

logger = logging.getLogger(__name__)


@dataclass
class KeypointTaskModel:
    """One task's support/query tensors behind the TaskLossModel protocol.

    Labels are pre-normalized: the inner and outer losses operate on
    normalized coordinates (pixel losses are an evaluation-time concern).
    """

    net: KeypointNet
    bn: PerStepBNStats
    support_images: torch.Tensor
    support_targets: torch.Tensor
    query_images: torch.Tensor | None = None
    query_targets: torch.Tensor | None = None

    def support_loss(self, params: dict[str, torch.Tensor], step: int, update_bn: bool) -> torch.Tensor:
        pred = self.net.forward(
            params, self.support_images, self.bn, step=step, accumulate=update_bn
        )
        return keypoint_loss(pred.coords, self.support_targets.to(pred.coords.dtype))

    def query_loss(self, params: dict[str, torch.Tensor], step: int) -> torch.Tensor:
        if self.query_images is None:
            raise ValueError("task model was built without a query set")
        pred = self.net.forward(params, self.query_images, self.bn, step=step, accumulate=False)
        return keypoint_loss(pred.coords, self.query_targets.to(pred.coords.dtype))


def task_model(
    net: KeypointNet,
    bn: PerStepBNStats,
    support: list[Sample],
    query: list[Sample] | None = None,
    dtype: torch.dtype = torch.float32,
) -> KeypointTaskModel:
    return KeypointTaskModel(
        net=net,
        bn=bn,
        support_images=image_batch(support, dtype),
        support_targets=to_normalized(label_batch(support, dtype), net.config),
        query_images=image_batch(query, dtype) if query else None,
        query_targets=to_normalized(label_batch(query, dtype), net.config) if query else None,
    )


def episode_task_models(
    net: KeypointNet, bn: PerStepBNStats, batch: EpisodeBatch, dtype: torch.dtype = torch.float32
) -> list[KeypointTaskModel]:
    """One task model per episode entry, sharing the state's BN statistics."""
    return [task_model(net, bn, e.support, e.query, dtype) for e in batch.entries]


def test_time_adapt(
    weights: dict[str, torch.Tensor],
    rates: InnerRateTable,
    bn: PerStepBNStats,
    net: KeypointNet,
    support: list[Sample],
    *,
    mode: str,
    steps: int,
    expected_k: int | None = None,
) -> dict[str, torch.Tensor]:
    """Few-shot adaptation of a trained checkpoint onto one day's support set.

    Runs the inner loop with the learned rates and the frozen per-step BN
    statistics, no gradient tracking, and returns the final weights.
    """
    if expected_k is not None and len(support) != expected_k:
        logger.warning(
            "support set has %d samples but the checkpoint was trained with k=%d; proceeding",
            len(support), expected_k,
        )
    if steps == 0:
        return dict(weights)
    model = task_model(net, bn, support)
    mask = adapt_mask(net.layer_names, net.head_layer_names, mode)
    trajectory = inner_adapt(
        weights,
        rates,
        model,
        num_steps=steps,
        mask=mask,
        second_order=False,
        track_gradients=False,
        update_bn=False,
    )
    return trajectory.final
