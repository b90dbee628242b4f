"""Optimization hyperparameters."""
from dataclasses import asdict, dataclass

from peft_forge.errors import ConfigurationError

MODES = ("linear", "full", "adapter")

DEFAULT_LR = 1e-3
FULL_FINETUNE_LR = 1e-4


@dataclass(frozen=True)
class TrainConfig:
    """AdamW + cosine-with-warmup recipe.

    ``base_lr`` left as None resolves to 1e-4 in full mode and 1e-3 otherwise.
    ``decay_norm_and_scale`` extends weight decay to layer-norm parameters
    and learned adapter scales, which are exempt by default.
    """

    mode: str = "adapter"
    base_lr: float = None
    weight_decay: float = 1e-4
    batch_size: int = 64
    total_epochs: int = 100
    warmup_epochs: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_norm_and_scale: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown training mode {self.mode!r}, expected one of {MODES}")
        if self.base_lr is None:
            object.__setattr__(self, "base_lr", FULL_FINETUNE_LR if self.mode == "full" else DEFAULT_LR)
        if self.base_lr <= 0:
            raise ConfigurationError(f"base_lr must be positive, got {self.base_lr}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1 or self.total_epochs < 1:
            raise ConfigurationError("batch_size and total_epochs must be >= 1")
        if not 0 <= self.warmup_epochs < self.total_epochs:
            raise ConfigurationError(
                f"warmup_epochs ({self.warmup_epochs}) must be in [0, total_epochs={self.total_epochs})"
            )
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0) or self.eps <= 0:
            raise ConfigurationError("betas must lie in [0, 1) and eps must be positive")

    def to_dict(self):
        return asdict(self)
