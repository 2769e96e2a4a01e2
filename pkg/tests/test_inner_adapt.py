"""Inner-loop adaptation against hand-computed oracles."""

import pytest
import torch

from metakey.errors import NonFiniteLossError
from metakey.metacore import InnerRateTable, adapt_mask, inner_adapt


class PowerTask:
    """support L = sum(theta^2), query L = sum((theta - 1)^2); no state."""

    def support_loss(self, params, step, update_bn):
        return sum((p ** 2).sum() for p in params.values())

    def query_loss(self, params, step):
        return sum(((p - 1.0) ** 2).sum() for p in params.values())


def single_param(value=1.0):
    return {"theta": torch.tensor([value], dtype=torch.float64)}


def test_hand_computed_single_step():
    # L(theta) = theta^2, rate 0.1, theta = 1 -> theta' = 1 - 0.1 * 2 = 0.8
    rates = InnerRateTable.create(["theta"], num_steps=1, init=0.1, dtype=torch.float64)
    traj = inner_adapt(
        single_param(1.0), rates, PowerTask(),
        num_steps=1, mask=frozenset({"theta"}), track_gradients=False, update_bn=False,
    )
    assert len(traj.steps) == 2
    assert traj.steps[1]["theta"].item() == 0.8
    assert traj.support_losses[0].item() == 1.0


def test_two_steps_compound():
    # step 2: 0.8 - 0.1 * 1.6 = 0.64
    rates = InnerRateTable.create(["theta"], num_steps=2, init=0.1, dtype=torch.float64)
    traj = inner_adapt(
        single_param(1.0), rates, PowerTask(),
        num_steps=2, mask=frozenset({"theta"}), track_gradients=False, update_bn=False,
    )
    assert traj.steps[2]["theta"].item() == pytest.approx(0.64, abs=1e-15)


def test_zero_steps_identity():
    rates = InnerRateTable.create(["theta"], num_steps=1, init=0.1)
    weights = single_param(3.0)
    traj = inner_adapt(
        weights, rates, PowerTask(),
        num_steps=0, mask=frozenset({"theta"}), track_gradients=False, update_bn=False,
    )
    assert len(traj.steps) == 1
    assert traj.steps[0]["theta"] is weights["theta"]
    assert traj.support_losses == []


def test_adapt_mask_modes():
    layers = ["enc0", "enc1", "head"]
    assert adapt_mask(layers, ["head"], "maml") == frozenset(layers)
    assert adapt_mask(layers, ["head"], "maml_pp") == frozenset(layers)
    assert adapt_mask(layers, ["head"], "anil_pp") == frozenset({"head"})


def test_anil_leaves_non_head_bitwise_unchanged():
    weights = {
        "enc.weight": torch.tensor([2.0, -1.0], dtype=torch.float64),
        "head.weight": torch.tensor([1.0], dtype=torch.float64),
    }
    rates = InnerRateTable.create(["enc", "head"], num_steps=3, init=0.1, dtype=torch.float64)
    traj = inner_adapt(
        weights, rates, PowerTask(),
        num_steps=3, mask=adapt_mask(["enc", "head"], ["head"], "anil_pp"),
        track_gradients=False, update_bn=False,
    )
    for step_params in traj.steps:
        assert torch.equal(step_params["enc.weight"], weights["enc.weight"])
    assert not torch.equal(traj.steps[-1]["head.weight"], weights["head.weight"])


def test_differentiable_trajectory_second_order():
    # d theta' / d theta = 1 - rate * L'' = 1 - 0.1 * 2 = 0.8
    leaf = torch.tensor([1.0], dtype=torch.float64, requires_grad=True)
    rates = InnerRateTable.create(["theta"], num_steps=1, init=0.1, dtype=torch.float64)
    traj = inner_adapt(
        {"theta": leaf}, rates, PowerTask(),
        num_steps=1, mask=frozenset({"theta"}), second_order=True,
        track_gradients=True, update_bn=False,
    )
    (grad,) = torch.autograd.grad(traj.steps[1]["theta"], leaf)
    assert grad.item() == pytest.approx(0.8, abs=1e-14)


def test_first_order_stops_inner_gradient():
    # FOMAML: theta' = theta - rate * stopgrad(2 theta) -> d theta'/d theta = 1
    leaf = torch.tensor([1.0], dtype=torch.float64, requires_grad=True)
    rates = InnerRateTable.create(["theta"], num_steps=1, init=0.1, dtype=torch.float64)
    traj = inner_adapt(
        {"theta": leaf}, rates, PowerTask(),
        num_steps=1, mask=frozenset({"theta"}), second_order=False,
        track_gradients=True, update_bn=False,
    )
    (grad,) = torch.autograd.grad(traj.steps[1]["theta"], leaf)
    assert grad.item() == 1.0


def test_rate_gradient_flows_in_first_order():
    # theta' = theta - alpha * g with g = 2 detached -> d theta'/d alpha = -2
    rates = InnerRateTable.create(["theta"], num_steps=1, init=0.1, dtype=torch.float64)
    rates.table["theta"].requires_grad_(True)
    leaf = torch.tensor([1.0], dtype=torch.float64, requires_grad=True)
    traj = inner_adapt(
        {"theta": leaf}, rates, PowerTask(),
        num_steps=1, mask=frozenset({"theta"}), second_order=False,
        track_gradients=True, update_bn=False,
    )
    (grad,) = torch.autograd.grad(traj.steps[1]["theta"], rates.table["theta"])
    assert grad.item() == -2.0


class NaNTask:
    def support_loss(self, params, step, update_bn):
        return params["theta"].sum() * float("nan")

    def query_loss(self, params, step):
        return params["theta"].sum()


def test_non_finite_loss_carries_context():
    rates = InnerRateTable.create(["theta"], num_steps=1, init=0.1, dtype=torch.float64)
    with pytest.raises(NonFiniteLossError) as exc:
        inner_adapt(
            single_param(1.0), rates, NaNTask(),
            num_steps=1, mask=frozenset({"theta"}), track_gradients=False,
            update_bn=False, episode=7,
        )
    message = str(exc.value)
    assert "episode 7" in message
    assert "step 0" in message
