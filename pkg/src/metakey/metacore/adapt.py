"""Inner-loop adaptation: masked per-step gradient descent with learned rates."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import NonFiniteLossError
from .model_api import TaskLossModel
from .rates import InnerRateTable


def layer_key(param_name: str) -> str:
    """Layer a parameter belongs to: 'enc0_conv.weight' -> 'enc0_conv'."""
    return param_name.rsplit(".", 1)[0] if "." in param_name else param_name


def adapt_mask(layer_names: list[str], head_layers: list[str], mode: str) -> frozenset[str]:
    """Layers the inner loop may update: everything, or just the head group."""
    if mode == "anil_pp":
        return frozenset(head_layers)
    return frozenset(layer_names)


@dataclass
class AdaptTrajectory:
    """Per-step adapted parameter dicts (length N+1, index 0 = initial)."""

    steps: list[dict[str, torch.Tensor]]
    support_losses: list[torch.Tensor]

    @property
    def final(self) -> dict[str, torch.Tensor]:
        return self.steps[-1]


def inner_adapt(
    weights: dict[str, torch.Tensor],
    rates: InnerRateTable,
    model: TaskLossModel,
    *,
    num_steps: int,
    mask: frozenset[str],
    second_order: bool = True,
    track_gradients: bool = True,
    update_bn: bool = True,
    episode: int | None = None,
) -> AdaptTrajectory:
    """Unroll ``num_steps`` masked gradient steps on the support loss.

    With ``track_gradients`` the returned trajectory stays differentiable
    with respect to ``weights`` and ``rates``; ``second_order=False``
    additionally stops gradients through the inner-gradient terms (the
    first-order approximation).  Without tracking, every step runs detached —
    the test-time path.

    Parameters outside ``mask`` are passed through untouched (the same
    tensor objects), so unmasked layers are bitwise stable across steps.
    """
    params = dict(weights)
    steps = [params]
    support_losses: list[torch.Tensor] = []

    for i in range(num_steps):
        adaptable = [n for n in params if layer_key(n) in mask]
        if track_gradients:
            current = params
        else:
            adaptable_set = set(adaptable)
            current = {
                n: (p.detach().requires_grad_(True) if n in adaptable_set else p.detach())
                for n, p in params.items()
            }
        loss = model.support_loss(current, i, update_bn)
        if not torch.isfinite(loss):
            raise NonFiniteLossError(
                f"non-finite support loss {loss.item()!r}", episode=episode, step=i
            )
        support_losses.append(loss.detach())
        grads = torch.autograd.grad(
            loss,
            [current[n] for n in adaptable],
            create_graph=track_gradients and second_order,
            allow_unused=True,
        )
        named_grads = dict(zip(adaptable, grads))
        with torch.no_grad() if not track_gradients else torch.enable_grad():
            new_params = {}
            for n, p in current.items():
                g = named_grads.get(n)
                if g is None:
                    new_params[n] = p
                    continue
                if track_gradients and not second_order:
                    g = g.detach()
                new_params[n] = p - rates.rate(layer_key(n), i) * g
        if not track_gradients:
            new_params = {n: p.detach() for n, p in new_params.items()}
        params = new_params
        steps.append(params)

    return AdaptTrajectory(steps=steps, support_losses=support_losses)
