"""Outer meta-update: multi-step query objective, meta-gradients, Adam step."""

from __future__ import annotations

import torch

from ..errors import NonFiniteLossError
from .adapt import adapt_mask, inner_adapt
from .config import MetaConfig
from .model_api import TaskLossModel
from .rates import InnerRateTable
from .schedules import SECOND_ORDER, cosine_outer_rate, derivative_order, msl_weights
from .state import MetaState


def meta_objective(
    weights: dict[str, torch.Tensor],
    rates: InnerRateTable,
    models: list[TaskLossModel],
    episode: int,
    cfg: MetaConfig,
    layer_names: list[str],
    head_layers: list[str],
    *,
    update_bn: bool = True,
) -> torch.Tensor:
    """Mean over tasks of the MSL-weighted query losses along the trajectory.

    The query pass after inner step i reads batch-norm set i frozen; support
    passes accumulate into their own sets when ``update_bn``.  Zero-weight
    steps skip their query pass entirely.
    """
    weights_msl = msl_weights(episode, cfg)
    second = derivative_order(episode, cfg) == SECOND_ORDER
    mask = adapt_mask(layer_names, head_layers, cfg.mode)

    entries: list[torch.Tensor] = []
    for model in models:
        trajectory = inner_adapt(
            weights,
            rates,
            model,
            num_steps=cfg.inner_steps,
            mask=mask,
            second_order=second,
            track_gradients=True,
            update_bn=update_bn,
            episode=episode,
        )
        term = None
        for i, w in enumerate(weights_msl):
            if w == 0.0:
                continue
            q = model.query_loss(trajectory.steps[i + 1], i)
            term = w * q if term is None else term + w * q
        entries.append(term)
    objective = entries[0] if len(entries) == 1 else sum(entries[1:], entries[0])
    objective = objective / len(entries)
    if not torch.isfinite(objective):
        raise NonFiniteLossError(
            f"non-finite meta-objective {objective.item()!r}", episode=episode
        )
    return objective


def meta_gradients(
    state: MetaState,
    models: list[TaskLossModel],
    cfg: MetaConfig,
) -> tuple[float, dict[str, torch.Tensor | None]]:
    """Objective value and meta-gradients for the state's current episode.

    Gradients are keyed like ``MetaState.meta_parameters`` ("weights.*" and,
    in rate-training modes, "rates.*"); entries the objective never touched
    come back as None.
    """
    weight_leaves = {k: v.detach().clone().requires_grad_(True) for k, v in state.weights.items()}
    if cfg.trains_inner_rates:
        rate_leaves = InnerRateTable(
            table={k: v.detach().clone().requires_grad_(True) for k, v in state.rates.table.items()},
            num_steps=state.rates.num_steps,
        )
    else:
        rate_leaves = InnerRateTable(
            table={k: v.detach().clone() for k, v in state.rates.table.items()},
            num_steps=state.rates.num_steps,
        )

    objective = meta_objective(
        weight_leaves, rate_leaves, models, state.episode, cfg,
        state.layer_names, state.head_layers,
    )

    named: dict[str, torch.Tensor] = {f"weights.{k}": v for k, v in weight_leaves.items()}
    if cfg.trains_inner_rates:
        named.update({f"rates.{k}": v for k, v in rate_leaves.table.items()})
    leaves = list(named.values())
    grads = torch.autograd.grad(objective, leaves, allow_unused=True)
    return float(objective.detach()), dict(zip(named.keys(), grads))


def outer_step(
    state: MetaState,
    models: list[TaskLossModel],
    cfg: MetaConfig,
) -> float:
    """One meta-update in place; returns the objective value.

    Adam consumes the meta-gradients at the cosine-annealed rate for the
    current episode, then the episode counter advances.
    """
    if state.episode >= cfg.episodes:
        raise ValueError(f"episode {state.episode} is past the training horizon {cfg.episodes}")
    if len(models) != cfg.meta_batch:
        raise ValueError(f"expected meta_batch={cfg.meta_batch} tasks, got {len(models)}")

    value, grads = meta_gradients(state, models, cfg)
    lr = cosine_outer_rate(state.episode, cfg)
    updated = state.adam.apply(state.meta_parameters(cfg), grads, lr)

    for key, tensor in updated.items():
        kind, _, name = key.partition(".")
        if kind == "weights":
            state.weights[name] = tensor
        else:
            state.rates.table[name] = tensor
    state.episode += 1
    return value
