"""Model configuration for the keypoint regression network."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError

HEAD_KINDS = ("direct_regression", "heatmap_soft_argmax")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs for the encoder / decoder / head stack.

    The encoder is a chain of conv -> batchnorm -> relu -> 2x downsample
    blocks; the decoder (used by the heatmap head) bilinearly upsamples back
    up before a 1x1 conv emits one heatmap per keypoint.
    """

    image_height: int = 128
    image_width: int = 128
    encoder_channels: tuple[int, ...] = (16, 32, 64, 64)
    decoder_stages: int = 2
    head_kind: str = "heatmap_soft_argmax"
    batchnorm: bool = True

    def __post_init__(self) -> None:
        if self.image_height < 8 or self.image_width < 8:
            raise ConfigError("image size must be at least 8x8")
        if not self.encoder_channels:
            raise ConfigError("encoder needs at least one block")
        if any(c < 1 for c in self.encoder_channels):
            raise ConfigError("encoder channel widths must be positive")
        if self.head_kind not in HEAD_KINDS:
            raise ConfigError(f"unknown head kind {self.head_kind!r}; expected one of {HEAD_KINDS}")
        if self.head_kind == "heatmap_soft_argmax":
            if not 1 <= self.decoder_stages <= len(self.encoder_channels):
                raise ConfigError("decoder_stages must be in [1, #encoder blocks] for the heatmap head")
        shrink = 2 ** len(self.encoder_channels)
        if self.image_height % shrink or self.image_width % shrink:
            raise ConfigError(
                f"image size {self.image_height}x{self.image_width} not divisible by "
                f"the encoder downsample factor {shrink}"
            )

    def to_mapping(self) -> dict:
        return {
            "image_height": self.image_height,
            "image_width": self.image_width,
            "encoder_channels": list(self.encoder_channels),
            "decoder_stages": self.decoder_stages,
            "head_kind": self.head_kind,
            "batchnorm": self.batchnorm,
        }

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ModelConfig":
        kwargs = dict(mapping)
        if "encoder_channels" in kwargs:
            raw = kwargs["encoder_channels"]
            if isinstance(raw, str):
                raw = [int(v) for v in raw.split(",")]
            kwargs["encoder_channels"] = tuple(int(v) for v in raw)
        for key in ("image_height", "image_width", "decoder_stages"):
            if key in kwargs:
                kwargs[key] = int(kwargs[key])
        if "batchnorm" in kwargs and isinstance(kwargs["batchnorm"], str):
            kwargs["batchnorm"] = kwargs["batchnorm"].strip().lower() in {"1", "true", "yes"}
        return cls(**kwargs)
