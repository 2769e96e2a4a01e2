"""Episode-indexed schedules: MSL weights, cosine outer rate, derivative order."""

from __future__ import annotations

import math

import numpy as np

from .config import MetaConfig

FIRST_ORDER = "first"
SECOND_ORDER = "second"


def msl_weights(episode: int, cfg: MetaConfig) -> np.ndarray:
    """Per-inner-step query-loss weights for the multi-step loss.

    Starts uniform (1/N each) and interpolates linearly in the episode index
    toward final-step-only; from ``msl_fraction * episodes`` onward the
    vector is exactly (0, ..., 0, 1).  Always sums to 1 (within float dust).
    """
    _check_episode(episode, cfg)
    n = cfg.inner_steps
    horizon = cfg.msl_fraction * cfg.episodes
    if horizon <= 0.0 or episode >= horizon:
        progress = 1.0
    else:
        progress = episode / horizon
    weights = np.full(n, (1.0 - progress) / n)
    weights[-1] += progress
    return weights


def cosine_outer_rate(episode: int, cfg: MetaConfig) -> float:
    """Outer learning rate annealed from outer_rate down to outer_rate_floor."""
    _check_episode(episode, cfg)
    if cfg.episodes == 1:
        return cfg.outer_rate
    span = cfg.outer_rate - cfg.outer_rate_floor
    cos = math.cos(math.pi * episode / (cfg.episodes - 1))
    return cfg.outer_rate_floor + 0.5 * span * (1.0 + cos)


def first_order_switch_episode(cfg: MetaConfig) -> int:
    """First episode that uses exact second-order gradients.

    This is ceil(first_order_fraction * episodes) in exact arithmetic; the
    tiny slack keeps float dust in the product from shifting the boundary.
    """
    return max(math.ceil(cfg.first_order_fraction * cfg.episodes - 1e-9), 0)


def derivative_order(episode: int, cfg: MetaConfig) -> str:
    """first-order approximation early in training, exact second-order after."""
    _check_episode(episode, cfg)
    return FIRST_ORDER if episode < first_order_switch_episode(cfg) else SECOND_ORDER


def _check_episode(episode: int, cfg: MetaConfig) -> None:
    if not 0 <= episode < cfg.episodes:
        raise ValueError(f"episode {episode} outside [0, {cfg.episodes})")
