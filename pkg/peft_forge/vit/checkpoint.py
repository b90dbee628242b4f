"""Binary checkpoints: magic, u64 header length, JSON header, little-endian tensor blob.

The header carries the format version, the backbone config, the class
count, the adapter plan (if any) and one entry per tensor with its name,
dtype, shape, byte offset, trainable flag and section. Sections are
``backbone``, ``adapters`` and ``head``; a file may hold any subset, so
adapters and the classifier can ship without the frozen backbone.
"""
import json
import logging
import struct
from pathlib import Path

import numpy as np

from peft_forge.adapters.attach import attach_adapters
from peft_forge.adapters.config import AdapterPlan
from peft_forge.autodiff.rng import Rng
from peft_forge.errors import CheckpointError
from peft_forge.vit.config import BackboneConfig
from peft_forge.vit.model import VisionTransformer

logger = logging.getLogger(__name__)

MAGIC = b"PEFTCKPT"
FORMAT_VERSION = 1
SECTIONS = ("backbone", "adapters", "head")

_DTYPE_TAGS = {np.dtype(np.float32): "<f4", np.dtype(np.float64): "<f8"}
_NATIVE = {"<f4": np.dtype(np.float32), "<f8": np.dtype(np.float64)}


def _section(name):
    return name.split(".", 1)[0]


def save_checkpoint(model, path, sections=SECTIONS):
    """Write ``model`` (or only the given sections of it) to ``path``."""
    sections = tuple(sections)
    unknown = set(sections) - set(SECTIONS)
    if unknown:
        raise CheckpointError(f"unknown checkpoint sections {sorted(unknown)}")

    entries, blobs, offset = [], [], 0
    for param in model.parameters():
        section = _section(param.name)
        if section not in sections:
            continue
        array = param.tensor.data
        tag = _DTYPE_TAGS[array.dtype]
        raw = np.ascontiguousarray(array, dtype=np.dtype(tag)).tobytes()
        entries.append({
            "name": param.name,
            "dtype": tag,
            "shape": list(array.shape),
            "offset": offset,
            "nbytes": len(raw),
            "trainable": param.trainable,
            "section": section,
        })
        blobs.append(raw)
        offset += len(raw)

    header = {
        "format_version": FORMAT_VERSION,
        "backbone": model.config.to_dict(),
        "n_classes": model.n_classes,
        "dtype": _DTYPE_TAGS[model.dtype],
        "plan": model.plan.to_dict() if model.plan is not None and "adapters" in sections else None,
        "sections": list(sections),
        "tensors": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for raw in blobs:
            fh.write(raw)
    logger.debug("saved %d tensors (%s) to %s", len(entries), ",".join(sections), path)
    return path


def read_checkpoint(path):
    """Parse a checkpoint into ``(header, {name: array})`` without building a model."""
    try:
        payload = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    prefix = len(MAGIC) + 8
    if len(payload) < prefix or payload[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    (header_len,) = struct.unpack("<Q", payload[len(MAGIC):prefix])
    if len(payload) < prefix + header_len:
        raise CheckpointError(f"{path} is truncated inside the header")
    try:
        header = json.loads(payload[prefix:prefix + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path} has a malformed header: {exc}") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path} has format version {version}, expected {FORMAT_VERSION}")

    blob = payload[prefix + header_len:]
    arrays = {}
    for entry in header["tensors"]:
        start, end = entry["offset"], entry["offset"] + entry["nbytes"]
        if end > len(blob):
            raise CheckpointError(f"{path} is truncated: tensor {entry['name']} ends past the data")
        try:
            array = np.frombuffer(blob[start:end], dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        except ValueError as exc:
            raise CheckpointError(f"{path}: tensor {entry['name']} is malformed: {exc}") from exc
        arrays[entry["name"]] = array.astype(_NATIVE[entry["dtype"]], copy=True)
    return header, arrays


def load_checkpoint(path, into=None):
    """Load a checkpoint as a new model, or overlay it onto ``into``.

    Overlaying a file that carries an adapter plan attaches those adapters
    first. A standalone load needs the backbone and head sections.
    """
    header, arrays = read_checkpoint(path)
    flags = {entry["name"]: entry["trainable"] for entry in header["tensors"]}

    if into is None:
        if not {"backbone", "head"} <= set(header["sections"]):
            raise CheckpointError(f"{path} holds only {header['sections']}; pass into= to overlay it")
        config = BackboneConfig.from_dict(header["backbone"])
        model = VisionTransformer(config, header["n_classes"], Rng(0), dtype=_NATIVE[header["dtype"]])
    else:
        model = into
        if "head" in header["sections"] and header["n_classes"] != model.n_classes:
            model._build_head(header["n_classes"], Rng(0))
    if header.get("plan"):
        attach_adapters(model, AdapterPlan.from_dict(header["plan"]), Rng(0))

    registry = model.named_parameters()
    missing = [name for name, p in registry.items() if _section(name) in header["sections"] and name not in arrays]
    unknown = [name for name in arrays if name not in registry]
    if missing or unknown:
        raise CheckpointError(f"{path} does not match the model: missing {missing[:5]}, unexpected {unknown[:5]}")
    for name, array in arrays.items():
        param = registry[name]
        if tuple(param.shape) != array.shape or param.tensor.dtype != array.dtype:
            raise CheckpointError(
                f"{name}: checkpoint has {array.dtype}{list(array.shape)}, model has {param.tensor.dtype}{list(param.shape)}"
            )
        param.tensor.data = array
        param.set_trainable(flags[name])
    logger.debug("loaded %d tensors from %s", len(arrays), path)
    return model
