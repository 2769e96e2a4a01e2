"""Meta-training state: weights, learned rates, BN statistics, outer Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from ..errors import CheckpointError, ConfigError
from ..kpnet.bn import PerStepBNStats
from .config import MetaConfig
from .rates import InnerRateTable

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    """Named-tensor Adam accumulators; the step size is supplied per call."""

    m: dict[str, torch.Tensor]
    v: dict[str, torch.Tensor]
    t: int = 0

    @classmethod
    def create(cls, named: dict[str, torch.Tensor]) -> "AdamState":
        return cls(
            m={k: torch.zeros_like(p) for k, p in named.items()},
            v={k: torch.zeros_like(p) for k, p in named.items()},
        )

    def apply(
        self,
        params: dict[str, torch.Tensor],
        grads: dict[str, torch.Tensor | None],
        lr: float,
    ) -> dict[str, torch.Tensor]:
        """One Adam update over every registered parameter; returns new tensors.

        A missing gradient counts as zero (e.g. rate entries whose layers the
        mode never adapts).
        """
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1**self.t
        bc2 = 1.0 - ADAM_BETA2**self.t
        out: dict[str, torch.Tensor] = {}
        for name, p in params.items():
            if name not in self.m:
                raise KeyError(f"parameter {name!r} is not registered with the outer optimizer")
            g = grads.get(name)
            if g is None:
                g = torch.zeros_like(p)
            self.m[name] = ADAM_BETA1 * self.m[name] + (1.0 - ADAM_BETA1) * g
            self.v[name] = ADAM_BETA2 * self.v[name] + (1.0 - ADAM_BETA2) * g * g
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            out[name] = (p - lr * m_hat / (v_hat.sqrt() + ADAM_EPS)).detach()
        return out

    def clone(self) -> "AdamState":
        return AdamState(
            m={k: v.clone() for k, v in self.m.items()},
            v={k: v.clone() for k, v in self.v.items()},
            t=self.t,
        )

    def named_arrays(self) -> dict[str, torch.Tensor]:
        arrays = {f"adam.m.{k}": v for k, v in self.m.items()}
        arrays.update({f"adam.v.{k}": v for k, v in self.v.items()})
        arrays["adam.t"] = torch.tensor(self.t, dtype=torch.int64)
        return arrays

    @classmethod
    def from_named_arrays(cls, arrays: dict[str, torch.Tensor], param_names: list[str]) -> "AdamState":
        try:
            m = {k: arrays[f"adam.m.{k}"] for k in param_names}
            v = {k: arrays[f"adam.v.{k}"] for k in param_names}
            t = int(arrays["adam.t"])
        except KeyError as exc:
            raise CheckpointError(f"missing optimizer array {exc.args[0]}") from None
        return cls(m=m, v=v, t=t)


@dataclass
class MetaState:
    """Everything the meta-learner owns, serializable losslessly."""

    weights: dict[str, torch.Tensor]
    rates: InnerRateTable
    bn: PerStepBNStats | None
    adam: AdamState
    episode: int
    mode: str
    layer_names: list[str]
    head_layers: list[str]

    @classmethod
    def create(
        cls,
        weights: dict[str, torch.Tensor],
        layer_names: list[str],
        head_layers: list[str],
        cfg: MetaConfig,
        bn: PerStepBNStats | None = None,
    ) -> "MetaState":
        if not head_layers:
            raise ConfigError("model declares no head layers; the adaptation mask needs a head group")
        if layer_names[-len(head_layers):] != list(head_layers):
            raise ConfigError(
                f"head group {head_layers} is not the contiguous trailing group of {layer_names}"
            )
        dtype = weights[next(iter(weights))].dtype
        rates = InnerRateTable.create(list(layer_names), cfg.inner_steps, cfg.inner_rate_init, dtype=dtype)
        state = cls(
            weights=dict(weights),
            rates=rates,
            bn=bn,
            adam=AdamState.create({}),
            episode=0,
            mode=cfg.mode,
            layer_names=list(layer_names),
            head_layers=list(head_layers),
        )
        state.adam = AdamState.create(state.meta_parameters(cfg))
        return state

    def meta_parameters(self, cfg: MetaConfig) -> dict[str, torch.Tensor]:
        """Everything the outer optimizer updates, as one named dict."""
        named = {f"weights.{k}": v for k, v in self.weights.items()}
        if cfg.trains_inner_rates:
            named.update(self.rates.named_arrays())
        return named

    def clone(self) -> "MetaState":
        return MetaState(
            weights={k: v.clone() for k, v in self.weights.items()},
            rates=self.rates.clone(),
            bn=self.bn.clone() if self.bn is not None else None,
            adam=self.adam.clone(),
            episode=self.episode,
            mode=self.mode,
            layer_names=list(self.layer_names),
            head_layers=list(self.head_layers),
        )
