"""Checkpoint container round-trips, guards, and the selection rule."""

import json

import numpy as np
import pytest
import torch

from metakey.baseline import BaselineState
from metakey.errors import CheckpointError
from metakey.harness import (
    Checkpoint,
    checkpoint_name,
    list_checkpoints,
    load_checkpoint,
    save_checkpoint,
    select_checkpoint,
)
from metakey.kpnet import ModelConfig, KeypointNet
from metakey.metacore import MetaConfig, MetaState


MODEL = ModelConfig(image_height=16, image_width=16, encoder_channels=(2, 3))
MCFG = MetaConfig(episodes=50, meta_batch=2, k=3, query_size=4, inner_steps=2,
                  inner_rate_init=0.05, mode="maml_pp")


def meta_state(seed=0):
    net = KeypointNet(MODEL)
    weights = net.init_params(seed)
    return net, MetaState.create(
        weights, net.layer_names, net.head_layer_names, MCFG, bn=net.init_bn(MCFG.inner_steps)
    )


def save_meta(path, state, index=10, val_loss=0.5, fingerprint="f" * 64):
    return save_checkpoint(
        path,
        mode="maml_pp",
        index=index,
        fingerprint=fingerprint,
        val_loss=val_loss,
        model_config=MODEL,
        training_config=MCFG.to_mapping(),
        weights=state.weights,
        rates=state.rates,
        bn=state.bn,
        adam=state.adam,
    )


def save_baseline(path, state, index=3, val_loss=1.5):
    return save_checkpoint(
        path,
        mode="baseline",
        index=index,
        fingerprint="b" * 64,
        val_loss=val_loss,
        model_config=MODEL,
        training_config={"epochs": 5, "lr": 1e-4, "batch_size": 32, "finetune_steps": 2},
        weights=state.weights,
        bn=state.bn,
        adam=state.adam,
    )


def test_meta_round_trip_is_bitwise(tmp_path):
    net, state = meta_state()
    # make the accumulators non-trivial so the round trip is meaningful
    state.adam.t = 7
    for key in state.adam.m:
        state.adam.m[key] = state.adam.m[key] + 0.25
    path = save_meta(tmp_path / "ckpt.npz", state)
    loaded = load_checkpoint(path)

    assert loaded.mode == "maml_pp"
    assert loaded.index == 10
    assert loaded.val_loss == 0.5
    assert loaded.fingerprint == "f" * 64
    assert loaded.model_config == MODEL
    assert loaded.training_config == MCFG.to_mapping()
    for name in state.weights:
        assert torch.equal(loaded.weights[name], state.weights[name])
    for layer in state.rates.table:
        assert torch.equal(loaded.rates.table[layer], state.rates.table[layer])
    for key in state.adam.m:
        assert torch.equal(loaded.adam.m[key], state.adam.m[key])
    assert loaded.adam.t == 7
    assert loaded.bn.num_steps == 2
    for layer in net.bn_layer_names:
        for step in range(2):
            got_mean, got_var = loaded.bn.get(step, layer)
            want_mean, want_var = state.bn.get(step, layer)
            assert torch.equal(got_mean, want_mean)
            assert torch.equal(got_var, want_var)

    rebuilt = loaded.to_meta_state(loaded.build_net())
    assert rebuilt.episode == 10
    assert rebuilt.mode == "maml_pp"


def test_baseline_round_trip(tmp_path):
    net = KeypointNet(MODEL)
    state = BaselineState.create(net, seed=1)
    path = save_baseline(tmp_path / "b.npz", state)
    loaded = load_checkpoint(path)
    assert not loaded.is_meta
    assert loaded.rates is None
    restored = loaded.to_baseline_state()
    assert restored.epoch == 3
    for name in state.weights:
        assert torch.equal(restored.weights[name], state.weights[name])


def test_mode_guards_cut_both_ways(tmp_path):
    net, state = meta_state()
    meta_path = save_meta(tmp_path / "m.npz", state)
    meta_ckpt = load_checkpoint(meta_path)
    with pytest.raises(CheckpointError, match="learned rate table"):
        meta_ckpt.to_baseline_state()

    bstate = BaselineState.create(net, seed=2)
    base_path = save_baseline(tmp_path / "b.npz", bstate)
    base_ckpt = load_checkpoint(base_path)
    with pytest.raises(CheckpointError, match="no learned inner"):
        base_ckpt.to_meta_state(net)


def test_truncated_file_fails_cleanly(tmp_path):
    net, state = meta_state()
    path = save_meta(tmp_path / "t.npz", state)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(CheckpointError, match="corrupt or truncated"):
        load_checkpoint(path)


def test_garbage_and_missing_files_fail_cleanly(tmp_path):
    garbage = tmp_path / "g.npz"
    garbage.write_bytes(b"not a container at all")
    with pytest.raises(CheckpointError, match="corrupt or truncated"):
        load_checkpoint(garbage)
    with pytest.raises(CheckpointError, match="does not exist"):
        load_checkpoint(tmp_path / "missing.npz")


def test_version_mismatch_is_rejected(tmp_path):
    net, state = meta_state()
    path = save_meta(tmp_path / "v.npz", state)
    with np.load(path, allow_pickle=False) as data:
        arrays = {name: np.array(data[name]) for name in data.files}
    meta = json.loads(arrays["_meta"].tobytes().decode("utf-8"))
    meta["version"] = 999
    arrays["_meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_metadata_stores_exactly_one_loss_scalar(tmp_path):
    """The container has a train-domain val loss and no per-season losses,
    so checkpoint selection cannot possibly consult off-domain data."""
    net, state = meta_state()
    path = save_meta(tmp_path / "m.npz", state)
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(np.array(data["_meta"]).tobytes().decode("utf-8"))
    loss_keys = [k for k in meta if "loss" in k.lower()]
    assert loss_keys == ["val_loss"]
    assert isinstance(meta["val_loss"], float)


def test_selection_rule(tmp_path):
    net, state = meta_state()
    paths = [
        save_meta(tmp_path / checkpoint_name(True, idx), state, index=idx, val_loss=loss)
        for idx, loss in ((50, 3.0), (100, 2.5), (150, 2.7))
    ]
    series = [load_checkpoint(p) for p in paths]
    assert select_checkpoint(series).index == 100

    tie_paths = [
        save_meta(tmp_path / f"tie{i}.npz", state, index=idx, val_loss=2.5)
        for i, idx in enumerate((50, 100))
    ]
    ties = [load_checkpoint(p) for p in tie_paths]
    assert select_checkpoint(ties).index == 50
    assert select_checkpoint(list(reversed(ties))).index == 50

    with pytest.raises(CheckpointError, match="empty"):
        select_checkpoint([])


def test_checkpoint_listing_sorts_by_index(tmp_path):
    net, state = meta_state()
    for idx in (300, 50, 1000):
        save_meta(tmp_path / checkpoint_name(True, idx), state, index=idx)
    names = [p.name for p in list_checkpoints(tmp_path)]
    assert names == ["ckpt_ep0000050.npz", "ckpt_ep0000300.npz", "ckpt_ep0001000.npz"]
    assert list_checkpoints(tmp_path / "absent") == []
