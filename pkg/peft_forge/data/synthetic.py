"""Synthetic source/target transfer tasks.

Each class is an oriented sinusoidal grating in a class hue, overlaid with
a coloured Gaussian blob. The target task draws from the same class
family under a controlled shift: rotated gratings, a channel-mixed colour
palette, and a square-wave texture blended into the grating.
"""
import logging
from dataclasses import dataclass

import numpy as np
from matplotlib.colors import hsv_to_rgb

from peft_forge.autodiff.rng import Rng
from peft_forge.data.datasets import Dataset
from peft_forge.errors import ContractError

logger = logging.getLogger(__name__)

PIXEL_NOISE = 0.05
ORIENTATION_JITTER = 0.08


@dataclass(frozen=True)
class TransferShift:
    """``rotation`` in degrees; ``color`` and ``texture`` are blend factors in [0, 1]."""

    rotation: float = 0.0
    color: float = 0.0
    texture: float = 0.0

    def __post_init__(self):
        for name in ("color", "texture"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ContractError(f"shift.{name} must lie in [0, 1], got {getattr(self, name)}")

    @property
    def is_zero(self):
        return self.rotation == 0.0 and self.color == 0.0 and self.texture == 0.0


@dataclass(frozen=True)
class ClassPattern:
    angle: float
    frequency: float
    grating_rgb: tuple
    blob_rgb: tuple
    texture: float


def pattern_family(c, shift=None):
    """Per-class pattern parameters; a zero shift returns the source family."""
    if c < 2:
        raise ContractError(f"a classification task needs c >= 2 classes, got {c}")
    shift = shift or TransferShift()
    patterns = []
    for k in range(c):
        hue = k / c
        grating = hsv_to_rgb((hue, 0.8, 0.9))
        blob = hsv_to_rgb(((hue + 0.5) % 1.0, 0.9, 1.0))
        if shift.color:
            grating = (1.0 - shift.color) * grating + shift.color * np.roll(grating, 1)
            blob = (1.0 - shift.color) * blob + shift.color * np.roll(blob, 1)
        patterns.append(ClassPattern(
            angle=np.pi * k / c + np.deg2rad(shift.rotation),
            frequency=2.0 + (k % 3),
            grating_rgb=tuple(float(v) for v in grating),
            blob_rgb=tuple(float(v) for v in blob),
            texture=shift.texture,
        ))
    return patterns


def render(pattern, size, rng):
    """One ``[3, size, size]`` image in [0, 1]."""
    coords = (np.arange(size, dtype=np.float64) + 0.5) / size
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    angle = pattern.angle + rng.normal(None, ORIENTATION_JITTER)
    phase = rng.uniform(0.0, 2.0 * np.pi, None)
    wave = np.sin(2.0 * np.pi * pattern.frequency * (xx * np.cos(angle) + yy * np.sin(angle)) + phase)
    if pattern.texture:
        wave = (1.0 - pattern.texture) * wave + pattern.texture * np.sign(wave)
    grating = 0.5 + 0.5 * wave

    cy, cx = rng.uniform(0.2, 0.8, 2)
    radius = rng.uniform(0.08, 0.18, None)
    blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * radius ** 2))

    img = (
        0.7 * grating[None] * np.asarray(pattern.grating_rgb)[:, None, None]
        + 0.6 * blob[None] * np.asarray(pattern.blob_rgb)[:, None, None]
    )
    img = img + rng.normal(img.shape, PIXEL_NOISE)
    return np.clip(img, 0.0, 1.0)


def synth_split(patterns, n, size, rng, split, name):
    """``n`` class-balanced samples, labels shuffled."""
    c = len(patterns)
    labels = rng.child("labels").permutation(np.arange(n) % c) if n else np.zeros(0, dtype=np.int64)
    images = np.stack([render(patterns[label], size, rng.child("image", i)) for i, label in enumerate(labels)]) \
        if n else np.zeros((0, 3, size, size))
    return Dataset(images, labels, c, split=split, name=name)


@dataclass(frozen=True)
class TransferTask:
    train: Dataset
    val: Dataset
    test: Dataset


def synth_task(rng, c, n_train, n_val, n_test, shift=None, size=32, role="target"):
    """One task (train/val/test) of the family under ``shift``, drawn from ``rng.child(role)``."""
    if not isinstance(rng, Rng):
        rng = Rng(rng)
    patterns = pattern_family(c, shift)
    role_rng = rng.child(role)
    return TransferTask(**{
        split: synth_split(patterns, n, size, role_rng.child(split), split, f"synthetic-{role}")
        for split, n in (("train", n_train), ("val", n_val), ("test", n_test))
    })


def synth_transfer_pair(rng, c, n_train=800, n_val=200, n_test=200, shift=None, size=32):
    """Source and target tasks with train/val/test splits each.

    Source and target share the class family and differ by ``shift``. Every
    image comes from its own derived stream, so splits never share samples.
    """
    source = synth_task(rng, c, n_train, n_val, n_test, TransferShift(), size, role="source")
    target = synth_task(rng, c, n_train, n_val, n_test, shift, size, role="target")
    logger.debug("synthesized %d-class transfer pair (%s), %d/%d/%d per task", c, shift, n_train, n_val, n_test)
    return source, target
