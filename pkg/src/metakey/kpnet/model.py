"""Functional keypoint network: parameters live in plain named-tensor dicts.

Keeping the forward pass a pure function of (params, images, bn stats)
makes unrolled inner-loop differentiation straightforward: adapted
parameter dicts are ordinary autograd graph nodes, and batch-norm
statistics are addressed explicitly per inner step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import torch
import torch.nn.functional as F

from ..determinism import STREAM_INIT, torch_generator
from ..errors import ConfigError
from .bn import PerStepBNStats, batchnorm_functional
from .config import ModelConfig

KIND_CONV = "conv"
KIND_BATCHNORM = "batchnorm"
KIND_HEAD = "head"


@dataclass(frozen=True)
class LayerInfo:
    name: str
    kind: str


@dataclass
class Prediction:
    """Network output: normalized coordinates plus optional heatmaps.

    ``coords`` is (B, 4) in normalized units — (vp_x, vp_y, left_x, right_x)
    each divided by the relevant image extent.  ``heatmaps`` is the (B, 3,
    h, w) spatial distribution per keypoint for the soft-argmax head, each
    channel summing to 1.
    """

    coords: torch.Tensor
    heatmaps: torch.Tensor | None = None


class KeypointNet:
    """Layer plan, initialization, and functional forward for one config."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.layers: list[LayerInfo] = []
        self._shapes: dict[str, tuple[int, ...]] = {}
        self._build_plan()
        if not self.bn_layer_names:
            raise ConfigError(
                "model has no batch-norm layers; per-step statistics require at least one "
                "(set batchnorm = true)"
            )

    # --- plan ---------------------------------------------------------------

    def _add(self, name: str, kind: str, **arrays: tuple[int, ...]) -> None:
        self.layers.append(LayerInfo(name=name, kind=kind))
        for suffix, shape in arrays.items():
            self._shapes[f"{name}.{suffix}"] = shape

    def _build_plan(self) -> None:
        cfg = self.config
        prev = 3
        for i, ch in enumerate(cfg.encoder_channels):
            self._add(f"enc{i}_conv", KIND_CONV, weight=(ch, prev, 3, 3), bias=(ch,))
            if cfg.batchnorm:
                self._add(f"enc{i}_bn", KIND_BATCHNORM, weight=(ch,), bias=(ch,))
            prev = ch
        if cfg.head_kind == "direct_regression":
            self._add("head_fc", KIND_HEAD, weight=(4, prev), bias=(4,))
        else:
            for j in range(cfg.decoder_stages):
                ch = cfg.encoder_channels[max(len(cfg.encoder_channels) - 2 - j, 0)]
                self._add(f"dec{j}_conv", KIND_CONV, weight=(ch, prev, 3, 3), bias=(ch,))
                if cfg.batchnorm:
                    self._add(f"dec{j}_bn", KIND_BATCHNORM, weight=(ch,), bias=(ch,))
                prev = ch
            self._add("head_conv", KIND_HEAD, weight=(3, prev, 1, 1), bias=(3,))

    @property
    def layer_names(self) -> list[str]:
        return [info.name for info in self.layers]

    @property
    def head_layer_names(self) -> list[str]:
        return [info.name for info in self.layers if info.kind == KIND_HEAD]

    @property
    def bn_layer_names(self) -> list[str]:
        return [info.name for info in self.layers if info.kind == KIND_BATCHNORM]

    def bn_layer_channels(self) -> dict[str, int]:
        return {name: self._shapes[f"{name}.weight"][0] for name in self.bn_layer_names}

    def param_names(self) -> list[str]:
        return list(self._shapes)

    def layer_of(self, param_name: str) -> str:
        return param_name.rsplit(".", 1)[0]

    def num_parameters(self) -> int:
        return sum(math.prod(shape) for shape in self._shapes.values())

    def init_bn(self, num_steps: int, dtype: torch.dtype = torch.float32) -> PerStepBNStats:
        return PerStepBNStats.create(self.bn_layer_channels(), num_steps, dtype=dtype)

    # --- parameters -----------------------------------------------------------

    def init_params(self, seed: int, dtype: torch.dtype = torch.float32) -> dict[str, torch.Tensor]:
        """He-normal conv/linear weights, zero biases, identity batch norm."""
        gen = torch_generator(seed, STREAM_INIT)
        params: dict[str, torch.Tensor] = {}
        for name, shape in self._shapes.items():
            layer, suffix = name.rsplit(".", 1)
            kind = self._kind_of(layer)
            if kind == KIND_BATCHNORM:
                init = torch.ones(shape, dtype=dtype) if suffix == "weight" else torch.zeros(shape, dtype=dtype)
            elif suffix == "bias":
                init = torch.zeros(shape, dtype=dtype)
            else:
                fan_in = math.prod(shape[1:])
                std = math.sqrt(2.0 / fan_in)
                init = torch.randn(shape, generator=gen, dtype=torch.float32).to(dtype) * std
            params[name] = init
        return params

    def _kind_of(self, layer: str) -> str:
        for info in self.layers:
            if info.name == layer:
                return info.kind
        raise KeyError(layer)

    # --- forward ----------------------------------------------------------------

    def forward(
        self,
        params: dict[str, torch.Tensor],
        images: torch.Tensor,
        bn_stats: PerStepBNStats | None,
        *,
        step: int = 0,
        accumulate: bool = False,
    ) -> Prediction:
        """Run the network over an (B, 3, H, W) batch.

        ``accumulate`` selects the train-time batch-norm path (normalize by
        batch statistics, update running set ``step``); otherwise set
        ``step`` is read frozen.
        """
        cfg = self.config
        if images.ndim != 4 or images.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) images, got {tuple(images.shape)}")
        if images.shape[2] != cfg.image_height or images.shape[3] != cfg.image_width:
            raise ValueError(
                f"image batch is {images.shape[2]}x{images.shape[3]}, "
                f"model expects {cfg.image_height}x{cfg.image_width}"
            )
        if cfg.batchnorm and bn_stats is None:
            raise ValueError("model has batch-norm layers but no statistics were supplied")

        dtype = params[next(iter(params))].dtype
        x = images.to(dtype)

        def conv_bn_relu(x: torch.Tensor, conv: str, bn: str | None) -> torch.Tensor:
            x = F.conv2d(x, params[f"{conv}.weight"], params[f"{conv}.bias"], padding=1)
            if bn is not None:
                x = batchnorm_functional(
                    x, params[f"{bn}.weight"], params[f"{bn}.bias"],
                    bn_stats, bn, step, accumulate,
                )
            return F.relu(x)

        for i in range(len(cfg.encoder_channels)):
            bn = f"enc{i}_bn" if cfg.batchnorm else None
            x = conv_bn_relu(x, f"enc{i}_conv", bn)
            x = F.max_pool2d(x, 2)

        if cfg.head_kind == "direct_regression":
            pooled = x.mean(dim=(2, 3))
            coords = F.linear(pooled, params["head_fc.weight"], params["head_fc.bias"])
            return Prediction(coords=coords)

        for j in range(cfg.decoder_stages):
            x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
            bn = f"dec{j}_bn" if cfg.batchnorm else None
            x = conv_bn_relu(x, f"dec{j}_conv", bn)
        logits = F.conv2d(x, params["head_conv.weight"], params["head_conv.bias"])
        b, c, h, w = logits.shape
        flat = logits.reshape(b, c, h * w)
        heat = torch.softmax(flat, dim=2).reshape(b, c, h, w)

        # Soft-argmax: expectation over normalized bin centers, so outputs
        # stay inside [0, 1] x [0, 1] for any heatmap content.
        xs = torch.linspace(0.0, 1.0, w, dtype=dtype)
        ys = torch.linspace(0.0, 1.0, h, dtype=dtype)
        ex = (heat.sum(dim=2) * xs).sum(dim=2)  # (B, 3)
        ey = (heat.sum(dim=3) * ys).sum(dim=2)  # (B, 3)
        coords = torch.stack([ex[:, 0], ey[:, 0], ex[:, 1], ex[:, 2]], dim=1)
        return Prediction(coords=coords, heatmaps=heat)


def clone_params(params: dict[str, torch.Tensor]) -> dict[str, torch.Tensor]:
    return {name: tensor.detach().clone() for name, tensor in params.items()}


def params_allclose(
    a: dict[str, torch.Tensor], b: dict[str, torch.Tensor], exact: bool = True
) -> bool:
    if a.keys() != b.keys():
        return False
    cmp = torch.equal if exact else torch.allclose
    return all(cmp(a[name], b[name]) for name in a)


def iter_layer_params(net: KeypointNet, layer: str) -> Iterator[str]:
    for name in net.param_names():
        if net.layer_of(name) == layer:
            yield name
