"""The task-loss surface the bilevel optimizer differentiates through.

Anything exposing per-step support and query losses over a named parameter
dict can be meta-trained — the keypoint network via its adapter, or tiny
closed-form models in tests where the meta-gradient has a hand-derivable
value.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import torch


@runtime_checkable
class TaskLossModel(Protocol):
    def support_loss(
        self, params: dict[str, torch.Tensor], step: int, update_bn: bool
    ) -> torch.Tensor:
        """Loss on the task's support set at inner step ``step``.

        ``update_bn`` selects the accumulate path for models with running
        statistics; stateless models ignore it.
        """
        ...

    def query_loss(self, params: dict[str, torch.Tensor], step: int) -> torch.Tensor:
        """Loss on the task's query set after inner step ``step`` (read-only)."""
        ...
