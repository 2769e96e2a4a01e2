"""Keypoint regression network with explicit per-step batch-norm statistics."""

from .batches import image_batch, label_batch
from .bn import BN_EPS, BN_MOMENTUM, PerStepBNStats, batchnorm_functional
from .config import HEAD_KINDS, ModelConfig
from .loss import coordinate_scale, keypoint_loss, to_normalized, to_pixels
from .model import (
    KIND_BATCHNORM,
    KIND_CONV,
    KIND_HEAD,
    KeypointNet,
    LayerInfo,
    Prediction,
    clone_params,
    iter_layer_params,
    params_allclose,
)

__all__ = [
    "BN_EPS",
    "BN_MOMENTUM",
    "HEAD_KINDS",
    "KIND_BATCHNORM",
    "KIND_CONV",
    "KIND_HEAD",
    "KeypointNet",
    "LayerInfo",
    "ModelConfig",
    "PerStepBNStats",
    "Prediction",
    "batchnorm_functional",
    "clone_params",
    "coordinate_scale",
    "image_batch",
    "iter_layer_params",
    "keypoint_loss",
    "label_batch",
    "params_allclose",
    "to_normalized",
    "to_pixels",
]
