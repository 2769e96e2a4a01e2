"""Per-step batch-norm running statistics.

Meta-training keeps one independent set of running statistics per inner
step; step i reads and writes set i only, and the sets are reused (frozen)
for the corresponding steps at meta-test time.  Conventional training is
the single-set special case.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from ..errors import CheckpointError

BN_EPS = 1e-5
#: EMA momentum for running-statistic updates (new = (1-m)*old + m*batch).
BN_MOMENTUM = 0.1


@dataclass
class PerStepBNStats:
    """``num_steps`` independent (mean, var, count) sets per batch-norm layer."""

    layer_channels: dict[str, int]
    num_steps: int
    mean: dict[tuple[int, str], torch.Tensor] = field(default_factory=dict)
    var: dict[tuple[int, str], torch.Tensor] = field(default_factory=dict)
    count: dict[tuple[int, str], int] = field(default_factory=dict)

    @classmethod
    def create(
        cls, layer_channels: dict[str, int], num_steps: int, dtype: torch.dtype = torch.float32
    ) -> "PerStepBNStats":
        """Fresh identity statistics: mean 0, variance 1, count 0."""
        if num_steps < 1:
            raise ValueError("PerStepBNStats needs at least one statistics set")
        stats = cls(layer_channels=dict(layer_channels), num_steps=num_steps)
        for step in range(num_steps):
            for name, channels in layer_channels.items():
                stats.mean[(step, name)] = torch.zeros(channels, dtype=dtype)
                stats.var[(step, name)] = torch.ones(channels, dtype=dtype)
                stats.count[(step, name)] = 0
        return stats

    def _check_step(self, step: int) -> None:
        if not 0 <= step < self.num_steps:
            raise IndexError(
                f"batch-norm statistics step {step} out of range [0, {self.num_steps})"
            )

    def get(self, step: int, layer: str) -> tuple[torch.Tensor, torch.Tensor]:
        self._check_step(step)
        return self.mean[(step, layer)], self.var[(step, layer)]

    def update(self, step: int, layer: str, batch_mean: torch.Tensor, batch_var: torch.Tensor) -> None:
        """EMA update of set ``step``; other sets are untouched by construction."""
        self._check_step(step)
        key = (step, layer)
        self.mean[key] = (1.0 - BN_MOMENTUM) * self.mean[key] + BN_MOMENTUM * batch_mean.detach()
        self.var[key] = (1.0 - BN_MOMENTUM) * self.var[key] + BN_MOMENTUM * batch_var.detach()
        self.count[key] += 1

    def set_counts(self) -> list[int]:
        """Per-set update counts (all layers of a set update in lockstep)."""
        counts = []
        for step in range(self.num_steps):
            per_layer = {self.count[(step, name)] for name in self.layer_channels}
            if len(per_layer) > 1:
                raise AssertionError(f"statistics set {step} has uneven layer counts {per_layer}")
            counts.append(per_layer.pop() if per_layer else 0)
        return counts

    def clone(self) -> "PerStepBNStats":
        out = PerStepBNStats(layer_channels=dict(self.layer_channels), num_steps=self.num_steps)
        out.mean = {k: v.clone() for k, v in self.mean.items()}
        out.var = {k: v.clone() for k, v in self.var.items()}
        out.count = dict(self.count)
        return out

    # --- checkpoint serialization -----------------------------------------

    def named_arrays(self) -> dict[str, torch.Tensor]:
        arrays: dict[str, torch.Tensor] = {}
        for (step, name), tensor in self.mean.items():
            arrays[f"bn.mean.{step}.{name}"] = tensor
            arrays[f"bn.var.{step}.{name}"] = self.var[(step, name)]
            arrays[f"bn.count.{step}.{name}"] = torch.tensor(self.count[(step, name)], dtype=torch.int64)
        return arrays

    @classmethod
    def from_named_arrays(
        cls, arrays: dict[str, torch.Tensor], layer_channels: dict[str, int], num_steps: int
    ) -> "PerStepBNStats":
        stats = cls(layer_channels=dict(layer_channels), num_steps=num_steps)
        for step in range(num_steps):
            for name in layer_channels:
                try:
                    stats.mean[(step, name)] = arrays[f"bn.mean.{step}.{name}"]
                    stats.var[(step, name)] = arrays[f"bn.var.{step}.{name}"]
                    stats.count[(step, name)] = int(arrays[f"bn.count.{step}.{name}"])
                except KeyError as exc:
                    raise CheckpointError(f"missing batch-norm array {exc.args[0]}") from None
        return stats


def batchnorm_functional(
    x: torch.Tensor,
    scale: torch.Tensor,
    shift: torch.Tensor,
    stats: PerStepBNStats,
    layer: str,
    step: int,
    accumulate: bool,
) -> torch.Tensor:
    """Channel-wise batch norm over an NCHW tensor with explicit statistics.

    ``accumulate`` selects train behaviour (normalize by batch statistics,
    EMA-update running set ``step``); otherwise running set ``step`` is used
    read-only.
    """
    if accumulate:
        dims = (0, 2, 3)
        batch_mean = x.mean(dim=dims)
        batch_var = x.var(dim=dims, unbiased=False)
        stats.update(step, layer, batch_mean, batch_var)
        mean, var = batch_mean, batch_var
    else:
        mean, var = stats.get(step, layer)
        mean = mean.to(x.dtype)
        var = var.to(x.dtype)
    inv = torch.rsqrt(var + BN_EPS)
    shaped = lambda t: t.view(1, -1, 1, 1)  # noqa: E731
    return (x - shaped(mean)) * shaped(inv) * shaped(scale) + shaped(shift)
