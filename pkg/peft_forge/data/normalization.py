"""Per-channel input standardization presets."""
from dataclasses import dataclass

import numpy as np

from peft_forge.errors import ConfigurationError


@dataclass(frozen=True)
class NormalizationSpec:
    name: str
    mean: tuple
    std: tuple

    def __post_init__(self):
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ConfigurationError(f"normalization {self.name!r} needs 3-channel mean and std")
        if min(self.std) <= 0:
            raise ConfigurationError(f"normalization {self.name!r} has a non-positive std")

    @classmethod
    def custom(cls, mean, std):
        return cls("custom", tuple(float(m) for m in mean), tuple(float(s) for s in std))


IMAGENET = NormalizationSpec("imagenet", (0.485, 0.456, 0.406), (0.229, 0.224, 0.225))
INCEPTION = NormalizationSpec("inception", (0.5, 0.5, 0.5), (0.5, 0.5, 0.5))

PRESETS = {spec.name: spec for spec in (IMAGENET, INCEPTION)}


def normalization_spec(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown normalization {name!r}, expected one of {sorted(PRESETS)}") from None


def normalize_image(img, spec):
    """``(x - mean_c) / std_c`` over a ``[3, H, W]`` (or ``[b, 3, H, W]``) image in [0, 1]."""
    img = np.asarray(img)
    dtype = img.dtype if img.dtype.kind == "f" else np.float64
    mean = np.asarray(spec.mean, dtype=dtype).reshape(3, 1, 1)
    std = np.asarray(spec.std, dtype=dtype).reshape(3, 1, 1)
    return (img.astype(dtype, copy=False) - mean) / std
