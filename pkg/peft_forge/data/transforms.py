"""Resize, random resized crop, horizontal flip and the per-sample pipeline.

Images are ``[3, H, W]`` float arrays.
"""
import math
from dataclasses import dataclass

import numpy as np

from peft_forge.data.normalization import normalize_image
from peft_forge.errors import ConfigurationError, ContractError

POLICIES = ("vtab", "fgvc")

CROP_SCALE = (0.08, 1.0)
CROP_RATIO = (3.0 / 4.0, 4.0 / 3.0)
CROP_ATTEMPTS = 10


def _axis_weights(in_size, out_size):
    """Source indices and blend weights for bilinear sampling with half-pixel centres."""
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, in_size - 1)
    return lo, hi, src - lo


def resize(img, target):
    """Bilinear resize to ``target x target`` (or an ``(h, w)`` pair)."""
    out_h, out_w = (target, target) if np.isscalar(target) else target
    if out_h < 1 or out_w < 1:
        raise ContractError(f"degenerate target size {target}")
    img = np.asarray(img)
    _, in_h, in_w = img.shape
    if in_h < 1 or in_w < 1:
        raise ContractError(f"cannot resize an empty image {list(img.shape)}")
    top, bottom, wy = _axis_weights(in_h, out_h)
    left, right, wx = _axis_weights(in_w, out_w)
    wy = wy.astype(img.dtype)[None, :, None]
    wx = wx.astype(img.dtype)[None, None, :]
    rows = img[:, top, :] * (1 - wy) + img[:, bottom, :] * wy
    return rows[:, :, left] * (1 - wx) + rows[:, :, right] * wx


def resized_crop(img, top, left, height, width, target):
    """Crop the ``height x width`` window at ``(top, left)`` and resize it to ``target``."""
    if height < 1 or width < 1:
        raise ContractError(f"degenerate crop {height}x{width}")
    return resize(np.asarray(img)[:, top:top + height, left:left + width], target)


def sample_crop(height, width, rng, scale=CROP_SCALE, ratio=CROP_RATIO):
    """Pick ``(top, left, h, w)``: area fraction in ``scale``, log-uniform aspect in ``ratio``.

    Falls back to the largest centred crop with a clamped aspect ratio.
    """
    area = height * width
    log_ratio = (math.log(ratio[0]), math.log(ratio[1]))
    for _ in range(CROP_ATTEMPTS):
        target_area = area * rng.uniform(scale[0], scale[1], None)
        aspect = math.exp(rng.uniform(log_ratio[0], log_ratio[1], None))
        w = int(round(math.sqrt(target_area * aspect)))
        h = int(round(math.sqrt(target_area / aspect)))
        if 0 < w <= width and 0 < h <= height:
            top = int(rng.integers(0, height - h + 1))
            left = int(rng.integers(0, width - w + 1))
            return top, left, h, w
    in_ratio = width / height
    if in_ratio < ratio[0]:
        w, h = width, int(round(width / ratio[0]))
    elif in_ratio > ratio[1]:
        h, w = height, int(round(height * ratio[1]))
    else:
        w, h = width, height
    return (height - h) // 2, (width - w) // 2, h, w


def random_resized_crop(img, target, rng):
    img = np.asarray(img)
    top, left, h, w = sample_crop(img.shape[1], img.shape[2], rng)
    return resized_crop(img, top, left, h, w, target)


def horizontal_flip(img, rng, p=0.5):
    """Mirror the width axis with probability ``p``."""
    if rng.random() < p:
        return np.ascontiguousarray(np.asarray(img)[:, :, ::-1])
    return img


@dataclass(frozen=True)
class AugmentationSpec:
    """``vtab``: resize only. ``fgvc``: random resized crop and horizontal flip at train time."""

    policy: str = "vtab"
    target_size: int = 32

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigurationError(f"unknown augmentation policy {self.policy!r}, expected one of {POLICIES}")
        if self.target_size < 1:
            raise ContractError(f"degenerate target size {self.target_size}")


@dataclass(frozen=True)
class Pipeline:
    augmentation: AugmentationSpec
    normalization: object

    def __call__(self, img, rng=None, train=False):
        """Augment (train only) and normalize one image."""
        size = self.augmentation.target_size
        if train and self.augmentation.policy == "fgvc":
            if rng is None:
                raise ContractError("train-time fgvc augmentation needs an rng")
            img = random_resized_crop(img, size, rng.child("crop"))
            img = horizontal_flip(img, rng.child("flip"))
        else:
            img = resize(img, size)
        return normalize_image(img, self.normalization)
