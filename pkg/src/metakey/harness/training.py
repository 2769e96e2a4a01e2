"""Training orchestration: episode/epoch loops, validation, checkpoints, resume."""

from __future__ import annotations

import logging
import math
import time
from pathlib import Path

import torch

from ..baseline import BaselineConfig, train_conventional
from ..determinism import (
    STREAM_EPISODES,
    STREAM_VALIDATION,
    apply_deterministic_mode,
    deterministic_mode_requested,
    rng_for,
)
from ..errors import CheckpointError, NonFiniteLossError
from ..kpnet import KeypointNet
from ..metacore import (
    MetaState,
    adapt_mask,
    episode_task_models,
    inner_adapt,
    outer_step,
    task_model,
)
from ..taskdata import Split, sample_episode
from .checkpoint import checkpoint_name, list_checkpoints, load_checkpoint, save_checkpoint
from .expconfig import ExperimentConfig

logger = logging.getLogger(__name__)


def meta_validation_loss(
    net: KeypointNet,
    state: MetaState,
    val_split: Split,
    cfg: ExperimentConfig,
) -> float:
    """Mean post-adaptation query loss over a deterministic set of val episodes.

    Episode draws are keyed by (seed, current episode, episode slot), so every
    validation event is reproducible and independent of training order.
    Adaptation runs in test-time form: detached, first-order, statistics frozen.
    An episode whose adaptation diverges scores infinity instead of aborting
    training, so checkpoint selection simply never picks that state.
    """
    mcfg = cfg.meta
    mask = adapt_mask(net.layer_names, net.head_layer_names, state.mode)
    losses = []
    for slot in range(cfg.val_episodes):
        rng = rng_for(cfg.seed, STREAM_VALIDATION, state.episode, slot)
        batch = sample_episode(val_split, mcfg.k, mcfg.query_size, 1, rng)
        entry = batch.entries[0]
        model = task_model(net, state.bn, entry.support, entry.query)
        try:
            trajectory = inner_adapt(
                state.weights,
                state.rates,
                model,
                num_steps=mcfg.inner_steps,
                mask=mask,
                second_order=False,
                track_gradients=False,
                update_bn=False,
            )
            with torch.no_grad():
                loss = float(model.query_loss(trajectory.final, mcfg.inner_steps - 1))
        except NonFiniteLossError:
            loss = math.inf
        losses.append(loss if math.isfinite(loss) else math.inf)
    return sum(losses) / len(losses)


def _resume_checkpoint(cfg: ExperimentConfig):
    paths = list_checkpoints(cfg.run_dir())
    if not paths:
        return None
    ckpt = load_checkpoint(paths[-1])
    if ckpt.fingerprint != cfg.fingerprint():
        raise CheckpointError(
            f"cannot resume: checkpoint {paths[-1].name} was written by a config "
            f"with fingerprint {ckpt.fingerprint[:12]}…, but this config hashes "
            f"to {cfg.fingerprint()[:12]}…"
        )
    if ckpt.mode != cfg.mode:
        raise CheckpointError(
            f"cannot resume mode {cfg.mode!r} from a {ckpt.mode!r} checkpoint"
        )
    return ckpt


def _train_meta(cfg: ExperimentConfig, train_split: Split, val_split: Split, resume: bool) -> list[Path]:
    net = KeypointNet(cfg.model)
    mcfg = cfg.meta
    run_dir = cfg.run_dir()
    written: list[Path] = []

    state = None
    if resume:
        ckpt = _resume_checkpoint(cfg)
        if ckpt is not None:
            state = ckpt.to_meta_state(net)
            logger.info("resuming %s at episode %d", cfg.mode, state.episode)
    if state is None:
        weights = net.init_params(cfg.seed)
        state = MetaState.create(
            weights, net.layer_names, net.head_layer_names, mcfg, bn=net.init_bn(mcfg.inner_steps)
        )

    interval = cfg.effective_validation_interval()
    fingerprint = cfg.fingerprint()
    start = time.monotonic()
    while state.episode < mcfg.episodes:
        episode = state.episode
        rng = rng_for(cfg.seed, STREAM_EPISODES, episode)
        batch = sample_episode(train_split, mcfg.k, mcfg.query_size, mcfg.meta_batch, rng)
        models = episode_task_models(net, state.bn, batch)
        outer_step(state, models, mcfg)
        if state.episode % interval == 0 or state.episode == mcfg.episodes:
            val_loss = meta_validation_loss(net, state, val_split, cfg)
            path = save_checkpoint(
                run_dir / checkpoint_name(True, state.episode),
                mode=cfg.mode,
                index=state.episode,
                fingerprint=fingerprint,
                val_loss=val_loss,
                model_config=cfg.model,
                training_config=mcfg.to_mapping(),
                weights=state.weights,
                rates=state.rates,
                bn=state.bn,
                adam=state.adam,
            )
            written.append(path)
            logger.info(
                "episode %d/%d  val %.4f  (%.1fs)",
                state.episode, mcfg.episodes, val_loss, time.monotonic() - start,
            )
    return written


def _train_baseline(cfg: ExperimentConfig, train_split: Split, val_split: Split, resume: bool) -> list[Path]:
    from ..baseline import flat_split_samples

    net = KeypointNet(cfg.model)
    bcfg = cfg.baseline
    run_dir = cfg.run_dir()
    written: list[Path] = []

    state = None
    if resume:
        ckpt = _resume_checkpoint(cfg)
        if ckpt is not None:
            state = ckpt.to_baseline_state()
            logger.info("resuming baseline at epoch %d", state.epoch)

    fingerprint = cfg.fingerprint()
    for snapshot in train_conventional(
        net,
        train_split,
        bcfg,
        cfg.seed,
        state=state,
        val_samples=flat_split_samples(val_split),
        validation_interval=cfg.effective_validation_interval(),
    ):
        path = save_checkpoint(
            run_dir / checkpoint_name(False, snapshot.epoch),
            mode=cfg.mode,
            index=snapshot.epoch,
            fingerprint=fingerprint,
            val_loss=snapshot.val_loss,
            model_config=cfg.model,
            training_config=bcfg.to_mapping(),
            weights=snapshot.state.weights,
            bn=snapshot.state.bn,
            adam=snapshot.state.adam,
        )
        written.append(path)
        logger.info("epoch %d/%d  val %s", snapshot.epoch, bcfg.epochs, snapshot.val_loss)
    return written


def run_training(cfg: ExperimentConfig, *, resume: bool = False) -> list[Path]:
    """Drive one training run to its horizon; returns checkpoint paths written.

    With ``resume=True`` and an existing run directory, training continues
    from the newest checkpoint (fingerprint-checked); otherwise it starts
    fresh. Honours ``METAKEY_DETERMINISTIC=1``.
    """
    if deterministic_mode_requested():
        apply_deterministic_mode()
    cfg.require_splits("train", "val")
    collection = cfg.load_collection()
    train_split = cfg.build_split("train", collection)
    val_split = cfg.build_split("val", collection)
    cfg.run_dir().mkdir(parents=True, exist_ok=True)
    if cfg.is_meta:
        return _train_meta(cfg, train_split, val_split, resume)
    return _train_baseline(cfg, train_split, val_split, resume)
