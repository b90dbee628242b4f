"""Train / evaluate loops over frozen-backbone models."""
import logging
from dataclasses import dataclass, field

import numpy as np

from peft_forge.autodiff.ops import cross_entropy
from peft_forge.autodiff.tensor import Tensor, no_grad, zero_grads
from peft_forge.data.datasets import assemble_batch, iterate_batches
from peft_forge.errors import ConfigurationError, ContractError
from peft_forge.training.config import TrainConfig
from peft_forge.training.optim import OptimizerState, adamw_step
from peft_forge.training.schedule import cosine_warmup_lr, steps_per_epoch
from peft_forge.vit.model import VisionTransformer, freeze_backbone

logger = logging.getLogger(__name__)

EVAL_BATCH = 256


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    accuracy: float
    lr: float


@dataclass
class TrainResult:
    epochs: list = field(default_factory=list)
    state: OptimizerState = None

    @property
    def losses(self):
        return [m.loss for m in self.epochs]

    @property
    def final_loss(self):
        return self.epochs[-1].loss if self.epochs else float("nan")


def select_trainables(model, mode):
    """Set trainable flags for ``mode`` and return the trainable parameters.

    linear: classifier only. adapter: adapters and classifier, plus the
    backbone layer norms when the attached plan tunes them. full: everything.
    """
    if mode == "full":
        chosen = set(map(id, model.parameters()))
    elif mode == "linear":
        chosen = set(map(id, model.head_parameters()))
    elif mode == "adapter":
        if not model.adapters:
            raise ContractError("adapter mode needs adapters attached to the model")
        picked = model.adapter_parameters() + model.head_parameters()
        if model.plan is not None and model.plan.tune_backbone_norms:
            picked += model.backbone_norm_parameters()
        chosen = set(map(id, picked))
    else:
        raise ConfigurationError(f"unknown training mode {mode!r}")
    for p in model.parameters():
        p.set_trainable(id(p) in chosen)
    return model.trainable_parameters()


def _batch_tensors(model, dataset, indices, pipeline, rng, train, workers=None):
    images, labels = assemble_batch(dataset, indices, pipeline, rng, train, workers=workers)
    return Tensor(images.astype(model.dtype, copy=False)), labels


def train_epoch(model, dataset, cfg, state, rng, pipeline=None, epoch=0, workers=None):
    """One shuffled pass of forward, cross-entropy, backward and AdamW over ``dataset``.

    ``workers`` caps the threads used to assemble each batch.
    """
    if len(dataset) == 0:
        raise ContractError(f"cannot train on empty dataset {dataset.name}/{dataset.split}")
    params = model.trainable_parameters()
    spe = steps_per_epoch(len(dataset), cfg.batch_size)
    epoch_rng = rng.child("epoch", epoch)
    total_loss, correct, seen, lr = 0.0, 0, 0, 0.0
    for b, indices in enumerate(iterate_batches(dataset, cfg.batch_size, epoch_rng.child("shuffle"), shuffle=True)):
        images, labels = _batch_tensors(model, dataset, indices, pipeline, epoch_rng.child("augment", b), True, workers)
        logits = model.forward(images, train_mode=True, rng=epoch_rng.child("forward", b))
        loss = cross_entropy(logits, labels)
        loss.backward()
        lr = cosine_warmup_lr(state.step + 1, spe, cfg)
        adamw_step(params, None, state, lr, cfg)
        zero_grads(p.tensor for p in params)

        total_loss += float(loss.data) * len(labels)
        correct += int((np.argmax(logits.data, axis=-1) == labels).sum())
        seen += len(labels)
    return EpochMetrics(epoch=epoch, loss=total_loss / seen, accuracy=correct / seen, lr=lr)


def predict(model, dataset, pipeline=None, batch_size=EVAL_BATCH, workers=None):
    """Eval-mode logits for every sample, in dataset order."""
    outputs = []
    with no_grad():
        for indices in iterate_batches(dataset, batch_size):
            images, _ = _batch_tensors(model, dataset, indices, pipeline, None, False, workers)
            outputs.append(model.forward(images, train_mode=False).data)
    return np.concatenate(outputs)


def evaluate(model, dataset, pipeline=None, batch_size=EVAL_BATCH, workers=None):
    """Top-1 accuracy; ties resolve to the lowest class index."""
    logits = predict(model, dataset, pipeline, batch_size, workers)
    return float((np.argmax(logits, axis=-1) == dataset.labels).mean())


def fit(model, dataset, cfg, rng, pipeline=None, val_set=None, workers=None):
    """Train for ``cfg.total_epochs`` with the parameters ``select_trainables`` marks for ``cfg.mode``."""
    params = select_trainables(model, cfg.mode)
    result = TrainResult(state=OptimizerState.create(params))
    for epoch in range(cfg.total_epochs):
        metrics = train_epoch(model, dataset, cfg, result.state, rng, pipeline, epoch, workers)
        result.epochs.append(metrics)
        if val_set is not None and logger.isEnabledFor(logging.DEBUG):
            logger.debug("epoch %d val_acc=%.4f", epoch, evaluate(model, val_set, pipeline, workers=workers))
        logger.info("epoch %3d/%d loss=%.4f acc=%.4f lr=%.2e",
                    epoch + 1, cfg.total_epochs, metrics.loss, metrics.accuracy, metrics.lr)
    return result


def pretrain_backbone(config, source_train, rng, epochs, lr, pipeline=None, batch_size=64):
    """Train a backbone from scratch on ``source_train`` in full mode, then freeze it.

    Stands in for a pretrained checkpoint at desk scale; the source head
    stays on the returned model and is replaced by ``reset_head`` on transfer.
    """
    model = VisionTransformer(config, source_train.class_count, rng.child("init"))
    cfg = TrainConfig(
        mode="full",
        base_lr=lr,
        total_epochs=epochs,
        warmup_epochs=min(1, epochs - 1),
        batch_size=batch_size,
    )
    logger.info("pretraining %s on %d source images for %d epochs", model, len(source_train), epochs)
    fit(model, source_train, cfg, rng.child("train"), pipeline)
    return freeze_backbone(model)
