"""Training-driver contracts: checkpoint cadence, resume, determinism."""

import pytest
import torch

from metakey.errors import CheckpointError
from metakey.harness import (
    list_checkpoints,
    load_checkpoint,
    load_config,
    meta_validation_loss,
    run_training,
)
from metakey.kpnet import KeypointNet
from metakey.metacore import MetaState
from metakey.taskdata import builtin_regime, render_dataset

CONFIG_TEMPLATE = """
[experiment]
mode = maml_pp
seed = 0
out_dir = {out_dir}
validation_interval = 2
val_episodes = 2

[data]
manifest = {manifest}

[split.train]
days = early_00, early_01
portion = train

[split.val]
days = early_00, early_01
portion = val

[split.test]
days = early_00, early_01
portion = test

[model]
image_height = 16
image_width = 16
encoder_channels = 2, 3

[meta]
episodes = {episodes}
meta_batch = 2
k = 2
query_size = 2
inner_steps = 2
inner_rate_init = 0.05

[baseline]
epochs = {epochs}
lr = 1e-3
batch_size = 8
finetune_steps = 2
"""


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("tinydata")
    params = builtin_regime("early", 16)
    render_dataset(root, {"early": (params, ["early_00", "early_01"], 30)}, seed=5)
    return root / "manifest.csv"


def write_config(tmp_path, dataset, episodes=8, epochs=2, name="exp.ini", **overrides):
    text = CONFIG_TEMPLATE.format(
        out_dir=tmp_path / "runs", manifest=dataset, episodes=episodes, epochs=epochs
    )
    for old, new in overrides.items():
        assert old in text
        text = text.replace(old, new)
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_meta_training_checkpoint_cadence(tmp_path, dataset):
    cfg = load_config(write_config(tmp_path, dataset, episodes=8))
    written = run_training(cfg)
    # horizon 8 / interval 2 -> checkpoints at 2, 4, 6, 8 and nowhere else
    assert [p.name for p in written] == [
        "ckpt_ep0000002.npz", "ckpt_ep0000004.npz", "ckpt_ep0000006.npz", "ckpt_ep0000008.npz",
    ]
    last = load_checkpoint(written[-1])
    assert last.index == 8
    assert last.is_meta
    assert last.val_loss is not None
    assert last.fingerprint == cfg.fingerprint()


def test_baseline_training_checkpoint_cadence(tmp_path, dataset):
    path = write_config(
        tmp_path, dataset, epochs=2,
        **{"validation_interval = 2": "validation_interval = 1"},
    )
    cfg = load_config(path, mode="baseline")
    written = run_training(cfg)
    # the initial model plus every epoch
    assert [p.name for p in written] == [
        "ckpt_epoch0000000.npz", "ckpt_epoch0000001.npz", "ckpt_epoch0000002.npz",
    ]
    first = load_checkpoint(written[0])
    assert not first.is_meta
    assert first.val_loss is not None


def test_one_config_runs_all_three_modes(tmp_path, dataset):
    path = write_config(tmp_path, dataset, episodes=2, epochs=1)
    for mode in ("maml_pp", "anil_pp", "baseline"):
        cfg = load_config(path, mode=mode)
        written = run_training(cfg)
        assert written, mode
        assert cfg.run_dir().name == f"{mode}_s0"
        assert load_checkpoint(written[-1]).mode == mode


def test_resume_rejects_a_different_config(tmp_path, dataset):
    path = write_config(tmp_path, dataset, episodes=2)
    run_training(load_config(path))
    retuned = write_config(
        tmp_path, dataset, episodes=2, name="exp2.ini",
        **{"inner_rate_init = 0.05": "inner_rate_init = 0.06"},
    )
    with pytest.raises(CheckpointError, match="fingerprint"):
        run_training(load_config(retuned), resume=True)


def test_resume_of_a_finished_run_is_a_no_op(tmp_path, dataset):
    cfg = load_config(write_config(tmp_path, dataset, episodes=2))
    first = run_training(cfg)
    assert len(first) == 1
    again = run_training(cfg, resume=True)
    assert again == []
    assert len(list_checkpoints(cfg.run_dir())) == 1


@pytest.fixture()
def restore_torch_settings():
    threads = torch.get_num_threads()
    deterministic = torch.are_deterministic_algorithms_enabled()
    yield
    torch.set_num_threads(threads)
    torch.use_deterministic_algorithms(deterministic)


def test_kill_and_resume_reproduces_training_bitwise(
    tmp_path, dataset, monkeypatch, restore_torch_settings
):
    monkeypatch.setenv("METAKEY_DETERMINISTIC", "1")
    (tmp_path / "a").mkdir(exist_ok=True)
    straight = load_config(write_config(tmp_path / "a", dataset, episodes=6))
    run_training(straight)
    final_straight = load_checkpoint(list_checkpoints(straight.run_dir())[-1])

    (tmp_path / "b").mkdir(exist_ok=True)
    interrupted = load_config(write_config(tmp_path / "b", dataset, episodes=6))

    import metakey.harness.training as training_module

    real_outer_step = training_module.outer_step

    def killing_outer_step(state, models, cfg):
        if state.episode == 4:
            raise RuntimeError("simulated crash")
        return real_outer_step(state, models, cfg)

    monkeypatch.setattr(training_module, "outer_step", killing_outer_step)
    with pytest.raises(RuntimeError, match="simulated crash"):
        run_training(interrupted)
    monkeypatch.setattr(training_module, "outer_step", real_outer_step)
    assert len(list_checkpoints(interrupted.run_dir())) == 2  # episodes 2 and 4

    run_training(interrupted, resume=True)
    final_resumed = load_checkpoint(list_checkpoints(interrupted.run_dir())[-1])

    assert final_resumed.index == final_straight.index == 6
    for name in final_straight.weights:
        assert torch.equal(final_resumed.weights[name], final_straight.weights[name]), name
    for layer in final_straight.rates.table:
        assert torch.equal(final_resumed.rates.table[layer], final_straight.rates.table[layer])
    net = final_straight.build_net()
    for layer in net.bn_layer_names:
        for step in range(final_straight.bn.num_steps):
            a_mean, a_var = final_straight.bn.get(step, layer)
            b_mean, b_var = final_resumed.bn.get(step, layer)
            assert torch.equal(a_mean, b_mean)
            assert torch.equal(a_var, b_var)
    for key in final_straight.adam.m:
        assert torch.equal(final_resumed.adam.m[key], final_straight.adam.m[key])
        assert torch.equal(final_resumed.adam.v[key], final_straight.adam.v[key])
    assert final_resumed.adam.t == final_straight.adam.t
    assert final_resumed.val_loss == final_straight.val_loss


def test_meta_validation_loss_is_deterministic(tmp_path, dataset):
    cfg = load_config(write_config(tmp_path, dataset, episodes=2))
    collection = cfg.load_collection()
    val_split = cfg.build_split("val", collection)
    net = KeypointNet(cfg.model)
    state = MetaState.create(
        net.init_params(0), net.layer_names, net.head_layer_names, cfg.meta,
        bn=net.init_bn(cfg.meta.inner_steps),
    )
    a = meta_validation_loss(net, state, val_split, cfg)
    b = meta_validation_loss(net, state, val_split, cfg)
    assert a == b
