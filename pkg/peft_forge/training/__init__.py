"""AdamW, the cosine-with-warmup schedule and the train/eval loops."""
from peft_forge.training.config import MODES, TrainConfig
from peft_forge.training.loop import (
    EpochMetrics,
    TrainResult,
    evaluate,
    fit,
    predict,
    pretrain_backbone,
    select_trainables,
    train_epoch,
)
from peft_forge.training.optim import OptimizerState, adamw_step
from peft_forge.training.schedule import cosine_warmup_lr, steps_per_epoch

__all__ = [
    "MODES",
    "EpochMetrics",
    "OptimizerState",
    "TrainConfig",
    "TrainResult",
    "adamw_step",
    "cosine_warmup_lr",
    "evaluate",
    "fit",
    "predict",
    "pretrain_backbone",
    "select_trainables",
    "steps_per_epoch",
    "train_epoch",
]
