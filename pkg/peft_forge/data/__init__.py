"""Image pre-processing, synthetic transfer tasks and image-folder ingestion."""
from peft_forge.data.datasets import Dataset, assemble_batch, iterate_batches
from peft_forge.data.folder import load_image_folder
from peft_forge.data.normalization import IMAGENET, INCEPTION, NormalizationSpec, normalization_spec, normalize_image
from peft_forge.data.synthetic import TransferShift, TransferTask, pattern_family, synth_task, synth_transfer_pair
from peft_forge.data.transforms import (
    AugmentationSpec,
    Pipeline,
    horizontal_flip,
    random_resized_crop,
    resize,
    resized_crop,
)

__all__ = [
    "IMAGENET",
    "INCEPTION",
    "AugmentationSpec",
    "Dataset",
    "NormalizationSpec",
    "Pipeline",
    "TransferShift",
    "TransferTask",
    "assemble_batch",
    "horizontal_flip",
    "iterate_batches",
    "load_image_folder",
    "normalization_spec",
    "normalize_image",
    "pattern_family",
    "random_resized_crop",
    "resize",
    "resized_crop",
    "synth_task",
    "synth_transfer_pair",
]
