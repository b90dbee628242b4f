"""Immutable labelled image sets and seed-deterministic batching."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from peft_forge.autodiff.tensor import default_dtype
from peft_forge.errors import ContractError, DimensionError, LabelIndexError
from peft_forge.settings import worker_cap

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Images ``[N, 3, H, W]`` in [0, 1] with integer labels in ``[0, class_count)``.

    Arrays are made read-only on construction. ``warnings`` collects
    non-fatal ingestion notes such as empty class directories.
    """

    images: np.ndarray
    labels: np.ndarray
    class_count: int
    split: str = "train"
    name: str = "dataset"
    warnings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        images = np.asarray(self.images)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 4 or images.shape[0] != labels.shape[0]:
            raise DimensionError("Dataset", images.shape, labels.shape)
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise LabelIndexError(
                f"{self.name}/{self.split}: labels must lie in [0, {self.class_count}), "
                f"got {labels.min()}..{labels.max()}"
            )
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return int(self.labels.shape[0])

    def __getitem__(self, index):
        return self.images[index], int(self.labels[index])

    @property
    def image_size(self):
        return self.images.shape[-1]

    def merge(self, other):
        """Concatenate two splits of the same task (e.g. train + val)."""
        if other.class_count != self.class_count or other.images.shape[1:] != self.images.shape[1:]:
            raise ContractError(f"cannot merge {self.name}/{self.split} with {other.name}/{other.split}")
        return Dataset(
            np.concatenate([self.images, other.images]),
            np.concatenate([self.labels, other.labels]),
            self.class_count,
            split=f"{self.split}+{other.split}",
            name=self.name,
            warnings=self.warnings + other.warnings,
        )

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[indices], self.labels[indices], self.class_count, self.split, self.name)


def iterate_batches(dataset, batch_size, rng=None, shuffle=False):
    """Yield index arrays covering ``dataset`` once; the last batch may be short."""
    if len(dataset) == 0:
        raise ContractError(f"{dataset.name}/{dataset.split} is empty")
    order = rng.permutation(len(dataset)) if shuffle else np.arange(len(dataset))
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


def assemble_batch(dataset, indices, pipeline=None, rng=None, train=False, workers=None):
    """Images ``[b, 3, T, T]`` in the default dtype, and labels, for ``indices``.

    Each sample is transformed with its own ``rng.child("sample", index)``, so
    order and content do not depend on thread scheduling.
    """
    indices = [int(i) for i in indices]

    def load(index):
        img = dataset.images[index]
        if pipeline is None:
            return img
        sample_rng = rng.child("sample", index) if rng is not None else None
        return pipeline(img, sample_rng, train)

    workers = min(workers or worker_cap(), len(indices)) or 1
    if workers == 1:
        images = [load(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            images = list(executor.map(load, indices))
    return np.stack(images).astype(default_dtype(), copy=False), dataset.labels[indices].copy()
