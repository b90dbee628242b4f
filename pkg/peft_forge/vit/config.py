"""Backbone hyperparameters."""
from dataclasses import asdict, dataclass

from peft_forge.errors import ConfigurationError


@dataclass(frozen=True)
class BackboneConfig:
    image_size: int = 32
    patch_size: int = 8
    hidden_dim: int = 64
    num_layers: int = 4
    num_heads: int = 4
    ffn_expansion: int = 4
    drop_path_max: float = 0.1
    channels: int = 3

    def __post_init__(self):
        for field in ("image_size", "patch_size", "hidden_dim", "num_layers", "num_heads", "ffn_expansion", "channels"):
            if getattr(self, field) < 1:
                raise ConfigurationError(f"backbone.{field} must be >= 1, got {getattr(self, field)}")
        if self.image_size % self.patch_size:
            raise ConfigurationError(
                f"image_size {self.image_size} is not divisible by patch_size {self.patch_size}"
            )
        if self.hidden_dim % self.num_heads:
            raise ConfigurationError(
                f"hidden_dim {self.hidden_dim} is not divisible by num_heads {self.num_heads}"
            )
        if not 0.0 <= self.drop_path_max <= 1.0:
            raise ConfigurationError(f"drop_path_max must lie in [0, 1], got {self.drop_path_max}")

    @property
    def grid(self):
        return self.image_size // self.patch_size

    @property
    def num_patches(self):
        return self.grid * self.grid

    @property
    def num_tokens(self):
        """Patches plus the CLS token."""
        return self.num_patches + 1

    @property
    def head_dim(self):
        return self.hidden_dim // self.num_heads

    @property
    def ffn_dim(self):
        return self.ffn_expansion * self.hidden_dim

    @property
    def patch_dim(self):
        return self.channels * self.patch_size * self.patch_size

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        return cls(**values)

    @classmethod
    def vit_b16(cls):
        """ViT-B/16 at 224 px, used for full-scale parameter accounting."""
        return cls(image_size=224, patch_size=16, hidden_dim=768, num_layers=12, num_heads=12, ffn_expansion=4)

    @classmethod
    def toy(cls):
        return cls()


def count_backbone_params(config):
    """Closed-form parameter count of the backbone (no classifier)."""
    d, f, N = config.hidden_dim, config.ffn_dim, config.num_layers
    embed = config.patch_dim * d + d + d + config.num_tokens * d
    attention = 4 * (d * d + d)
    ffn = d * f + f + f * d + d
    norms = 4 * d
    return embed + N * (attention + ffn + norms) + 2 * d
