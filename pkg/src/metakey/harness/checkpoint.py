"""Single-file checkpoint container: named arrays plus a JSON metadata block.

Layout (stable, documented in the README): a NumPy ``.npz`` archive whose
arrays are

- ``weights.<param>``     — model parameters
- ``rates.<layer>``       — learned per-layer per-step inner rates (meta modes)
- ``bn.mean.<s>.<layer>`` / ``bn.var.<s>.<layer>`` / ``bn.count.<s>.<layer>``
                          — per-step batch-norm running statistics
- ``adam.m.<name>`` / ``adam.v.<name>`` / ``adam.t``
                          — outer-optimizer accumulators (for resume)
- ``_meta``               — uint8-encoded JSON: version, mode, episode/epoch
                            index, config fingerprint, train-domain val loss,
                            model configuration, training hyperparameters,
                            optimizer parameter names, bn step count

The metadata block makes a checkpoint loadable without its config file.
"""

from __future__ import annotations

import json
import os
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..baseline import BaselineState
from ..errors import CheckpointError
from ..kpnet import KeypointNet, ModelConfig, PerStepBNStats
from ..metacore import AdamState, InnerRateTable, MetaConfig, MetaState

CHECKPOINT_VERSION = 1
META_BLOCK = "_meta"


@dataclass
class Checkpoint:
    """A loaded container: arrays rebuilt into their owning structures."""

    version: int
    mode: str
    index: int
    fingerprint: str
    val_loss: float | None
    model_config: ModelConfig
    training_config: dict
    weights: dict[str, torch.Tensor]
    rates: InnerRateTable | None
    bn: PerStepBNStats | None
    adam: AdamState | None

    @property
    def is_meta(self) -> bool:
        return self.rates is not None

    def build_net(self) -> KeypointNet:
        return KeypointNet(self.model_config)

    def to_meta_state(self, net: KeypointNet) -> MetaState:
        if not self.is_meta:
            raise CheckpointError(
                "checkpoint was trained conventionally; it has no learned inner "
                "rates to resume meta-training from"
            )
        return MetaState(
            weights=self.weights,
            rates=self.rates,
            bn=self.bn,
            adam=self.adam,
            episode=self.index,
            mode=self.mode,
            layer_names=net.layer_names,
            head_layers=net.head_layer_names,
        )

    def to_baseline_state(self) -> BaselineState:
        if self.is_meta:
            raise CheckpointError(
                f"checkpoint was trained in meta mode {self.mode!r}; using it as a "
                "conventional model would silently drop the learned rate table"
            )
        return BaselineState(
            weights=self.weights, bn=self.bn, adam=self.adam, epoch=self.index
        )


def _tensor_arrays(prefix: str, tensors: dict[str, torch.Tensor]) -> dict[str, np.ndarray]:
    return {f"{prefix}.{k}": v.detach().cpu().numpy() for k, v in tensors.items()}


def save_checkpoint(
    path: str | Path,
    *,
    mode: str,
    index: int,
    fingerprint: str,
    val_loss: float | None,
    model_config: ModelConfig,
    training_config: dict,
    weights: dict[str, torch.Tensor],
    rates: InnerRateTable | None = None,
    bn: PerStepBNStats | None = None,
    adam: AdamState | None = None,
) -> Path:
    """Atomically write the container; returns the final path."""
    path = Path(path)
    arrays: dict[str, np.ndarray] = _tensor_arrays("weights", weights)
    if rates is not None:
        arrays.update({k: v.detach().cpu().numpy() for k, v in rates.named_arrays().items()})
    if bn is not None:
        arrays.update({k: v.cpu().numpy() for k, v in bn.named_arrays().items()})
    adam_params: list[str] = []
    if adam is not None:
        arrays.update({k: v.cpu().numpy() for k, v in adam.named_arrays().items()})
        adam_params = sorted(adam.m)
    meta = {
        "version": CHECKPOINT_VERSION,
        "mode": mode,
        "index": index,
        "fingerprint": fingerprint,
        "val_loss": val_loss,
        "model": model_config.to_mapping(),
        "training": training_config,
        "adam_params": adam_params,
        "bn_steps": bn.num_steps if bn is not None else 0,
        "has_rates": rates is not None,
        "rate_steps": rates.num_steps if rates is not None else 0,
    }
    arrays[META_BLOCK] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    tmp = path.with_name(path.name + ".tmp")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        with np.load(path, allow_pickle=False) as data:
            raw = {name: np.array(data[name]) for name in data.files}
    except (zipfile.BadZipFile, OSError, ValueError, EOFError) as err:
        raise CheckpointError(f"checkpoint {path} is corrupt or truncated: {err}") from err

    if META_BLOCK not in raw:
        raise CheckpointError(f"checkpoint {path} has no metadata block")
    try:
        meta = json.loads(raw.pop(META_BLOCK).tobytes().decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"checkpoint {path} metadata is unreadable: {err}") from err

    version = meta.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has container version {version!r}; "
            f"this build reads version {CHECKPOINT_VERSION}"
        )

    tensors = {name: torch.from_numpy(arr) for name, arr in raw.items()}
    model_config = ModelConfig.from_mapping(meta["model"])
    net = KeypointNet(model_config)

    prefix = "weights."
    weights = {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}
    expected = set(net.param_names())
    if set(weights) != expected:
        missing = sorted(expected - set(weights))
        surplus = sorted(set(weights) - expected)
        raise CheckpointError(
            f"checkpoint {path} parameter arrays do not match the stored model "
            f"configuration (missing {missing[:3]}, surplus {surplus[:3]})"
        )

    rates = None
    if meta.get("has_rates"):
        rates = InnerRateTable.from_named_arrays(tensors, net.layer_names, int(meta["rate_steps"]))

    bn = None
    if meta.get("bn_steps", 0) > 0:
        bn = PerStepBNStats.from_named_arrays(tensors, net.bn_layer_channels(), int(meta["bn_steps"]))

    adam = None
    if meta.get("adam_params"):
        adam = AdamState.from_named_arrays(tensors, list(meta["adam_params"]))

    return Checkpoint(
        version=version,
        mode=meta["mode"],
        index=int(meta["index"]),
        fingerprint=meta["fingerprint"],
        val_loss=meta["val_loss"],
        model_config=model_config,
        training_config=dict(meta["training"]),
        weights=weights,
        rates=rates,
        bn=bn,
        adam=adam,
    )


def checkpoint_name(is_meta: bool, index: int) -> str:
    unit = "ep" if is_meta else "epoch"
    return f"ckpt_{unit}{index:07d}.npz"


def list_checkpoints(run_dir: str | Path) -> list[Path]:
    """Checkpoint files of a run directory in ascending index order."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        return []
    return sorted(run_dir.glob("ckpt_*.npz"))


def load_series(run_dir: str | Path) -> list[Checkpoint]:
    return [load_checkpoint(p) for p in list_checkpoints(run_dir)]


def select_checkpoint(series: list[Checkpoint]) -> Checkpoint:
    """Deployment-style selection: argmin train-domain val loss, earliest tie.

    Checkpoints carry only the training-domain validation loss, so the
    selection provably cannot consult other domains.
    """
    if not series:
        raise CheckpointError("cannot select from an empty checkpoint series")
    scored = [c for c in series if c.val_loss is not None]
    if not scored:
        raise CheckpointError("no checkpoint in the series carries a validation loss")
    return min(scored, key=lambda c: (c.val_loss, c.index))
