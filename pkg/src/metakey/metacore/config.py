"""Meta-training configuration."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError

MODES = ("maml", "maml_pp", "anil_pp")


@dataclass(frozen=True)
class MetaConfig:
    """Bilevel-training hyperparameters.

    Defaults are the published configuration: 20k episodes, meta-batch 4,
    5-shot support, 3 inner steps at initial rate 0.4, outer rate cosine-
    annealed from 1e-3 to 1e-5, multi-step loss annealed over 99% of
    training, first-order updates for the first 30%.
    """

    episodes: int = 20000
    meta_batch: int = 4
    k: int = 5
    query_size: int = 10
    inner_steps: int = 3
    inner_rate_init: float = 0.4
    outer_rate: float = 0.001
    outer_rate_floor: float = 0.00001
    msl_fraction: float = 0.99
    first_order_fraction: float = 0.3
    mode: str = "maml_pp"

    def __post_init__(self) -> None:
        positives = {
            "episodes": self.episodes,
            "meta_batch": self.meta_batch,
            "k": self.k,
            "query_size": self.query_size,
            "inner_steps": self.inner_steps,
            "inner_rate_init": self.inner_rate_init,
            "outer_rate": self.outer_rate,
            "outer_rate_floor": self.outer_rate_floor,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        for name, value in (("msl_fraction", self.msl_fraction),
                            ("first_order_fraction", self.first_order_fraction)):
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.outer_rate_floor > self.outer_rate:
            raise ConfigError("outer_rate_floor must not exceed outer_rate")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")

    @property
    def trains_inner_rates(self) -> bool:
        """Vanilla maml keeps the inner rate fixed; the ++ modes learn it."""
        return self.mode in ("maml_pp", "anil_pp")

    def to_mapping(self) -> dict:
        return {
            "episodes": self.episodes,
            "meta_batch": self.meta_batch,
            "k": self.k,
            "query_size": self.query_size,
            "inner_steps": self.inner_steps,
            "inner_rate_init": self.inner_rate_init,
            "outer_rate": self.outer_rate,
            "outer_rate_floor": self.outer_rate_floor,
            "msl_fraction": self.msl_fraction,
            "first_order_fraction": self.first_order_fraction,
            "mode": self.mode,
        }

    @classmethod
    def from_mapping(cls, mapping: dict) -> "MetaConfig":
        kwargs = {}
        ints = {"episodes", "meta_batch", "k", "query_size", "inner_steps"}
        floats = {"inner_rate_init", "outer_rate", "outer_rate_floor",
                  "msl_fraction", "first_order_fraction"}
        for key, raw in mapping.items():
            if key in ints:
                kwargs[key] = int(raw)
            elif key in floats:
                kwargs[key] = float(raw)
            elif key == "mode":
                kwargs[key] = str(raw)
            else:
                raise ConfigError(f"unknown meta-config key {key!r}")
        return cls(**kwargs)
