"""Test-time few-shot finetuning of a conventionally trained model."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from ..errors import NonFiniteLossError
from ..kpnet import KeypointNet, PerStepBNStats
from ..metacore import InnerRateTable, inner_adapt, task_model
from ..taskdata import Sample


@dataclass
class FinetuneResult:
    """Adapted weights plus divergence bookkeeping.

    ``diverged`` is set instead of raising so that a hopeless learning rate
    can still be scored — the harness reports its (large) loss rather than
    crashing the sweep.
    """

    weights: dict[str, torch.Tensor]
    diverged: bool
    steps_taken: int
    support_losses: list[float] = field(default_factory=list)


def finetune_baseline(
    net: KeypointNet,
    bn: PerStepBNStats,
    weights: dict[str, torch.Tensor],
    support: list[Sample],
    *,
    lr: float,
    steps: int,
) -> FinetuneResult:
    """Plain gradient descent on the support loss, every layer adaptable.

    Batch-norm statistics stay frozen throughout. Each update is the same
    arithmetic expression the episodic inner loop uses, so with equal rates
    the two paths produce bitwise-identical weights.
    """
    if steps == 0 or lr == 0.0:
        return FinetuneResult(weights=dict(weights), diverged=False, steps_taken=0)
    dtype = next(iter(weights.values())).dtype
    model = task_model(net, bn, support, dtype=dtype)
    rates = InnerRateTable.create(net.layer_names, 1, lr, dtype=dtype)
    mask = frozenset(net.layer_names)
    current = dict(weights)
    losses: list[float] = []
    for step in range(steps):
        try:
            trajectory = inner_adapt(
                current,
                rates,
                model,
                num_steps=1,
                mask=mask,
                second_order=False,
                track_gradients=False,
                update_bn=False,
            )
        except NonFiniteLossError:
            return FinetuneResult(current, diverged=True, steps_taken=step, support_losses=losses)
        advanced = trajectory.final
        if any(not torch.isfinite(v).all() for v in advanced.values()):
            return FinetuneResult(current, diverged=True, steps_taken=step, support_losses=losses)
        losses.append(float(trajectory.support_losses[0]))
        current = advanced
    return FinetuneResult(current, diverged=False, steps_taken=steps, support_losses=losses)
