"""Keypoint L1 loss and the pixel <-> normalized coordinate interface.

The loss itself is unit-agnostic: the sum of L1 distances over the three
keypoints (the vanishing point contributes |dx| + |dy|, each intercept
|dx|), averaged over the batch.  Training minimizes it on normalized
coordinates; evaluation and reports compute it on pixel coordinates.
"""

from __future__ import annotations

import torch

from ..errors import NonFiniteLossError
from .config import ModelConfig


def keypoint_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean over the batch of sum_i |pred_i - target_i| over the 4 coordinates.

    The L1 subgradient at zero residual is taken as 0.
    """
    if pred.shape != target.shape or pred.shape[-1] != 4:
        raise ValueError(f"expected matching (B, 4) tensors, got {tuple(pred.shape)} vs {tuple(target.shape)}")
    if not torch.isfinite(pred).all():
        raise NonFiniteLossError("non-finite values in predicted keypoints")
    if not torch.isfinite(target).all():
        raise NonFiniteLossError("non-finite values in keypoint labels")
    return (pred - target).abs().sum(dim=-1).mean()


def coordinate_scale(config: ModelConfig, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Per-coordinate pixel extents: (W-1, H-1, W-1, W-1)."""
    w = float(config.image_width - 1)
    h = float(config.image_height - 1)
    return torch.tensor([w, h, w, w], dtype=dtype)


def to_pixels(coords_norm: torch.Tensor, config: ModelConfig) -> torch.Tensor:
    return coords_norm * coordinate_scale(config, coords_norm.dtype)


def to_normalized(coords_px: torch.Tensor, config: ModelConfig) -> torch.Tensor:
    return coords_px / coordinate_scale(config, coords_px.dtype)
