"""Training loop, evaluation, checkpointing and ablation grids."""

from .ablation import deep_merge, render_table, run_grid
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .evaluation import EvalReport, evaluate, marginalize_scores
from .model import AnticipationModel, ForwardOutput, ModelBuildError
from .training import (
    TrainConfig,
    TrainConfigError,
    TrainResult,
    TrainingDiverged,
    horizon_near_one_second,
    split_scores,
    train,
)

__all__ = [
    "AnticipationModel",
    "CheckpointError",
    "EvalReport",
    "ForwardOutput",
    "ModelBuildError",
    "TrainConfig",
    "TrainConfigError",
    "TrainResult",
    "TrainingDiverged",
    "deep_merge",
    "evaluate",
    "horizon_near_one_second",
    "load_checkpoint",
    "marginalize_scores",
    "render_table",
    "run_grid",
    "save_checkpoint",
    "split_scores",
    "train",
]
