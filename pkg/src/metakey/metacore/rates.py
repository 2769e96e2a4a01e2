"""Learned per-layer per-step inner learning rates."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import CheckpointError


@dataclass
class InnerRateTable:
    """One trainable rate per (named layer, inner step).

    Every parameter of a layer shares that layer's rate.  The table is a
    meta-parameter: in the ++ modes the outer optimizer updates it alongside
    the weights.
    """

    table: dict[str, torch.Tensor]  # layer -> (num_steps,) tensor
    num_steps: int

    @classmethod
    def create(
        cls,
        layer_names: list[str],
        num_steps: int,
        init: float,
        dtype: torch.dtype = torch.float32,
    ) -> "InnerRateTable":
        if num_steps < 1:
            raise ValueError("rate table needs at least one step")
        if not layer_names:
            raise ValueError("rate table needs at least one layer")
        table = {
            name: torch.full((num_steps,), float(init), dtype=dtype) for name in layer_names
        }
        return cls(table=table, num_steps=num_steps)

    @property
    def layer_names(self) -> list[str]:
        return list(self.table)

    @property
    def num_entries(self) -> int:
        return len(self.table) * self.num_steps

    def rate(self, layer: str, step: int) -> torch.Tensor:
        """0-dim tensor; stays in the autograd graph when the table does."""
        if not 0 <= step < self.num_steps:
            raise IndexError(f"inner step {step} out of range [0, {self.num_steps})")
        return self.table[layer][step]

    def values(self) -> torch.Tensor:
        """(num_layers, num_steps) snapshot, detached."""
        return torch.stack([self.table[name].detach() for name in self.table])

    def clone(self) -> "InnerRateTable":
        return InnerRateTable(
            table={k: v.detach().clone() for k, v in self.table.items()},
            num_steps=self.num_steps,
        )

    def named_arrays(self) -> dict[str, torch.Tensor]:
        return {f"rates.{name}": tensor for name, tensor in self.table.items()}

    @classmethod
    def from_named_arrays(
        cls, arrays: dict[str, torch.Tensor], layer_names: list[str], num_steps: int
    ) -> "InnerRateTable":
        table = {}
        for name in layer_names:
            key = f"rates.{name}"
            if key not in arrays:
                raise CheckpointError(f"missing inner-rate array {key}")
            tensor = arrays[key]
            if tensor.shape != (num_steps,):
                raise CheckpointError(
                    f"inner-rate array {key} has shape {tuple(tensor.shape)}, expected ({num_steps},)"
                )
            table[name] = tensor
        return cls(table=table, num_steps=num_steps)
