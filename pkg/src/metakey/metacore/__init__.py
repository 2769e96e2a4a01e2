"""Bilevel meta-optimizer: inner adaptation, outer updates, schedules."""

from .adapt import AdaptTrajectory, adapt_mask, inner_adapt, layer_key
from .config import MODES, MetaConfig
from .kpmodel import KeypointTaskModel, episode_task_models, task_model, test_time_adapt
from .model_api import TaskLossModel
from .outer import meta_gradients, meta_objective, outer_step
from .rates import InnerRateTable
from .schedules import (
    FIRST_ORDER,
    SECOND_ORDER,
    cosine_outer_rate,
    derivative_order,
    first_order_switch_episode,
    msl_weights,
)
from .state import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, AdamState, MetaState

__all__ = [
    "ADAM_BETA1",
    "ADAM_BETA2",
    "ADAM_EPS",
    "AdaptTrajectory",
    "AdamState",
    "FIRST_ORDER",
    "InnerRateTable",
    "KeypointTaskModel",
    "MODES",
    "MetaConfig",
    "MetaState",
    "SECOND_ORDER",
    "TaskLossModel",
    "adapt_mask",
    "cosine_outer_rate",
    "derivative_order",
    "episode_task_models",
    "first_order_switch_episode",
    "inner_adapt",
    "layer_key",
    "meta_gradients",
    "meta_objective",
    "msl_weights",
    "outer_step",
    "task_model",
    "test_time_adapt",
]
