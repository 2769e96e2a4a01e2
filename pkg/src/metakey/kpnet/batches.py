"""Sample lists -> model tensors."""

from __future__ import annotations

import numpy as np
import torch

from ..taskdata import Sample


def image_batch(samples: list[Sample], dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(B, 3, H, W) tensor from a list of samples."""
    stack = np.stack([s.image() for s in samples])
    return torch.from_numpy(stack).permute(0, 3, 1, 2).contiguous().to(dtype)


def label_batch(samples: list[Sample], dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(B, 4) pixel-coordinate labels."""
    stack = np.stack([s.label.as_vector() for s in samples])
    return torch.from_numpy(stack).to(dtype)
