"""Inner-rate table shape/init, manual Adam vs torch oracle, MetaState contracts."""

import pytest
import torch

from metakey.errors import ConfigError
from metakey.metacore import AdamState, InnerRateTable, MetaConfig, MetaState


def test_rate_table_shape_and_init():
    layers = ["enc0_conv", "enc0_bn", "head_fc"]
    table = InnerRateTable.create(layers, num_steps=3, init=0.4)
    assert table.num_entries == 9
    values = table.values()
    assert values.shape == (3, 3)
    assert torch.equal(values, torch.full((3, 3), 0.4))
    assert table.rate("head_fc", 2).item() == pytest.approx(0.4)


def test_rate_step_bounds():
    table = InnerRateTable.create(["a"], num_steps=2, init=0.1)
    with pytest.raises(IndexError):
        table.rate("a", 2)


def test_rate_round_trip():
    table = InnerRateTable.create(["a", "b"], num_steps=2, init=0.4)
    table.table["b"] = torch.tensor([0.3, 0.7])
    restored = InnerRateTable.from_named_arrays(table.named_arrays(), ["a", "b"], 2)
    assert torch.equal(restored.table["b"], table.table["b"])


def test_manual_adam_matches_torch_adam():
    """The hand-rolled named-dict Adam follows the reference implementation."""
    torch.manual_seed(0)
    init = torch.randn(6, dtype=torch.float64)
    target = torch.randn(6, dtype=torch.float64)

    ours = {"w": init.clone()}
    state = AdamState.create(ours)

    theirs = init.clone().requires_grad_(True)
    opt = torch.optim.Adam([theirs], lr=0.01, betas=(0.9, 0.999), eps=1e-8)

    for _ in range(25):
        grad = 2 * (ours["w"] - target)
        ours = state.apply(ours, {"w": grad}, lr=0.01)

        opt.zero_grad()
        ((theirs - target) ** 2).sum().backward()
        opt.step()

    assert torch.allclose(ours["w"], theirs.detach(), atol=1e-12)


def test_adam_zero_grad_leaves_untouched_params_alone():
    params = {"a": torch.ones(3), "b": torch.ones(3)}
    state = AdamState.create(params)
    out = state.apply(params, {"a": torch.ones(3), "b": None}, lr=0.1)
    assert torch.equal(out["b"], params["b"])
    assert not torch.equal(out["a"], params["a"])


def test_meta_state_requires_head_group():
    cfg = MetaConfig()
    weights = {"w1.weight": torch.zeros(2), "w2.weight": torch.zeros(2)}
    with pytest.raises(ConfigError, match="head"):
        MetaState.create(weights, ["w1", "w2"], [], cfg)


def test_meta_state_head_must_be_trailing():
    cfg = MetaConfig()
    weights = {"w1.weight": torch.zeros(2), "w2.weight": torch.zeros(2)}
    with pytest.raises(ConfigError, match="contiguous trailing"):
        MetaState.create(weights, ["w1", "w2"], ["w1"], cfg)


def test_meta_parameters_include_rates_only_when_trained():
    weights = {"w1.weight": torch.zeros(2), "w2.weight": torch.zeros(2)}
    pp = MetaState.create(weights, ["w1", "w2"], ["w2"], MetaConfig(mode="maml_pp"))
    vanilla = MetaState.create(weights, ["w1", "w2"], ["w2"], MetaConfig(mode="maml"))
    assert any(k.startswith("rates.") for k in pp.meta_parameters(MetaConfig(mode="maml_pp")))
    assert not any(k.startswith("rates.") for k in vanilla.meta_parameters(MetaConfig(mode="maml")))


def test_config_validation():
    with pytest.raises(ConfigError, match="positive"):
        MetaConfig(episodes=0)
    with pytest.raises(ConfigError, match="outer_rate_floor"):
        MetaConfig(outer_rate=1e-5, outer_rate_floor=1e-3)
    with pytest.raises(ConfigError, match="mode"):
        MetaConfig(mode="reptile")
    with pytest.raises(ConfigError, match="msl_fraction"):
        MetaConfig(msl_fraction=1.5)


def test_config_defaults_match_published_values():
    cfg = MetaConfig()
    assert cfg.episodes == 20000
    assert cfg.meta_batch == 4
    assert cfg.k == 5
    assert cfg.inner_steps == 3
    assert cfg.inner_rate_init == 0.4
    assert cfg.outer_rate == 0.001
    assert cfg.outer_rate_floor == 0.00001
    assert cfg.msl_fraction == 0.99
    assert cfg.first_order_fraction == 0.3
