"""Class-per-subdirectory image folders."""
import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from peft_forge.data.datasets import Dataset
from peft_forge.data.transforms import resize
from peft_forge.errors import ContractError, IngestionError

logger = logging.getLogger(__name__)


def _decode(path):
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64).transpose(2, 0, 1) / 255.0


def load_image_folder(path, image_size=None, split="train"):
    """Read ``path/<class>/<image>`` into a Dataset.

    Classes are indexed in alphabetical order of their directory names.
    Images are decoded to 8-bit RGB, scaled to [0, 1] and resized to
    ``image_size`` (default: the first image's height). Files that fail to
    decode are collected and raised together as an IngestionError; empty
    class directories become warnings on the returned Dataset.
    """
    root = Path(path)
    if not root.is_dir():
        raise ContractError(f"{root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))
    if not class_dirs:
        raise ContractError(f"{root} has no class subdirectories")

    images, labels, failures, warnings = [], [], [], []
    for label, class_dir in enumerate(class_dirs):
        files = sorted(p for p in class_dir.iterdir() if p.is_file() and not p.name.startswith("."))
        if not files:
            warnings.append(f"class directory {class_dir.name!r} is empty")
            logger.warning("empty class directory %s", class_dir)
            continue
        for file in files:
            try:
                pixels = _decode(file)
            except (UnidentifiedImageError, OSError, ValueError) as exc:
                failures.append((str(file), str(exc) or type(exc).__name__))
                continue
            if image_size is None:
                image_size = pixels.shape[1]
            if pixels.shape[1:] != (image_size, image_size):
                pixels = resize(pixels, image_size)
            images.append(pixels)
            labels.append(label)

    if failures:
        raise IngestionError(failures)
    if not images:
        raise ContractError(f"{root} contains no images")
    logger.info("loaded %d images in %d classes from %s", len(images), len(class_dirs), root)
    return Dataset(
        np.stack(images),
        np.asarray(labels, dtype=np.int64),
        len(class_dirs),
        split=split,
        name=root.name,
        warnings=tuple(warnings),
    )
