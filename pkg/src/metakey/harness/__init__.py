"""Experiment orchestration: configs, checkpoints, training, evaluation, reports."""

from .checkpoint import (
    CHECKPOINT_VERSION,
    Checkpoint,
    checkpoint_name,
    list_checkpoints,
    load_checkpoint,
    load_series,
    save_checkpoint,
    select_checkpoint,
)
from .evaluation import ARM_NAMES, Arm, EvalReport, SeasonScore, evaluate
from .expconfig import (
    ExperimentConfig,
    SplitSection,
    TRAIN_MODES,
    load_config,
    parse_config_text,
)
from .report import (
    COLUMNS,
    format_cell,
    load_report,
    parse_report_csv,
    render,
    render_csv,
    render_markdown,
    report_from_mapping,
    report_to_mapping,
    save_report,
)
from .training import meta_validation_loss, run_training

__all__ = [
    "ARM_NAMES",
    "Arm",
    "CHECKPOINT_VERSION",
    "COLUMNS",
    "Checkpoint",
    "EvalReport",
    "ExperimentConfig",
    "SeasonScore",
    "SplitSection",
    "TRAIN_MODES",
    "checkpoint_name",
    "evaluate",
    "format_cell",
    "list_checkpoints",
    "load_checkpoint",
    "load_config",
    "load_report",
    "load_series",
    "meta_validation_loss",
    "parse_config_text",
    "parse_report_csv",
    "render",
    "render_csv",
    "render_markdown",
    "report_from_mapping",
    "report_to_mapping",
    "run_training",
    "save_checkpoint",
    "save_report",
    "select_checkpoint",
]
