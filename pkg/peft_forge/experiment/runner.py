"""Seeded experiment runs: pretrain (cached) -> transfer -> evaluate -> ResultRecord."""
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import psutil

from peft_forge.adapters.accounting import count_trainable_params, enumerate_trainable_params
from peft_forge.adapters.attach import attach_adapters
from peft_forge.autodiff.rng import Rng
from peft_forge.autodiff.tensor import set_default_dtype
from peft_forge.data.folder import load_image_folder
from peft_forge.data.normalization import normalization_spec
from peft_forge.data.synthetic import synth_task, synth_transfer_pair
from peft_forge.data.transforms import AugmentationSpec, Pipeline
from peft_forge.errors import ContractError
from peft_forge.settings import worker_cap
from peft_forge.training.loop import evaluate, fit, pretrain_backbone, select_trainables
from peft_forge.vit.checkpoint import load_checkpoint, save_checkpoint
from peft_forge.vit.model import freeze_backbone, reset_head
from peft_forge.vit.regularization import stochastic_depth_rate

logger = logging.getLogger(__name__)

_BACKBONES = {}
_TASKS = {}
_CACHE_LOCK = threading.Lock()

PRETRAIN_KEYS = ("backbone.", "experiment.pretrain", "experiment.precision", "data.classes", "data.seed",
                 "data.n_train", "data.pretrain_normalization")
PRETRAIN_BATCH = 64
TASK_KEYS = ("data.", "backbone.image_size", "experiment.precision")


@dataclass
class ResultRecord:
    config_hash: str
    seed: int
    label: str
    position: str
    rank: int
    init: str
    scaling: str
    norm: bool
    params: int
    val_acc: float
    test_acc: float
    seconds: float
    data_norm: str = "inception"
    study: str = "train"
    epoch_losses: list = field(default_factory=list)
    cpu_percent: float = 0.0
    mem_percent: float = 0.0

    @property
    def final_loss(self):
        return self.epoch_losses[-1] if self.epoch_losses else float("nan")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TransferData:
    train: object
    val: object
    test: object


def clear_caches():
    with _CACHE_LOCK:
        _BACKBONES.clear()
        _TASKS.clear()


# ---------------- pretrained backbone ----------------
def _pretrain(cfg):
    backbone = replace(cfg.backbone, drop_path_max=0.0)
    source = synth_task(Rng(cfg["data.seed"]), cfg["data.classes"], cfg["data.n_train"], 0, 0,
                        size=backbone.image_size, role="source")
    pipeline = Pipeline(AugmentationSpec("vtab", backbone.image_size), normalization_spec(cfg["data.pretrain_normalization"]))
    return pretrain_backbone(
        backbone,
        source.train,
        Rng(cfg["experiment.pretrain_seed"]).child("pretrain"),
        epochs=cfg["experiment.pretrain_epochs"],
        lr=cfg["experiment.pretrain_lr"],
        pipeline=pipeline,
        batch_size=PRETRAIN_BATCH,
    )


def pretrained_backbone(cfg):
    """Frozen source-task backbone for ``cfg``, built once per process per pretraining setup.

    With ``experiment.backbone_checkpoint`` set, an existing file is loaded
    and a fresh pretraining is saved there.
    """
    key = cfg.subset_hash(PRETRAIN_KEYS, exclude=("backbone.drop_path_max",))
    with _CACHE_LOCK:
        if key not in _BACKBONES:
            path = cfg["experiment.backbone_checkpoint"]
            if path and Path(path).exists():
                logger.info("loading pretrained backbone from %s", path)
                model = freeze_backbone(load_checkpoint(path))
            else:
                started = time.time()
                model = _pretrain(cfg)
                logger.info("pretrained backbone %s in %.1fs", key, time.time() - started)
                if path:
                    save_checkpoint(model, path)
            _BACKBONES[key] = model
        return _BACKBONES[key]


# ---------------- transfer data ----------------
def transfer_data(cfg):
    key = cfg.subset_hash(TASK_KEYS)
    with _CACHE_LOCK:
        if key not in _TASKS:
            if cfg["data.source"] == "folder":
                root = Path(cfg["data.path"])
                size = cfg["backbone.image_size"]
                _TASKS[key] = TransferData(*(load_image_folder(root / split, size, split) for split in ("train", "val", "test")))
            else:
                _, target = synth_transfer_pair(
                    Rng(cfg["data.seed"]), cfg["data.classes"], cfg["data.n_train"], cfg["data.n_val"],
                    cfg["data.n_test"], shift=cfg.shift, size=cfg["backbone.image_size"],
                )
                _TASKS[key] = TransferData(target.train, target.val, target.test)
        return _TASKS[key]


# ---------------- single seed ----------------
def _set_drop_path(model, max_rate):
    model.config = replace(model.config, drop_path_max=max_rate)
    for layer in model.layers:
        layer.drop_path_rate = stochastic_depth_rate(layer.layer_index, len(model.layers), max_rate)


def prepare_model(cfg, seed, n_classes):
    """Clone the pretrained backbone, give it a fresh head and the configured adapters."""
    rng = Rng(seed)
    model = pretrained_backbone(cfg).clone()
    _set_drop_path(model, cfg["backbone.drop_path_max"])
    reset_head(model, n_classes, rng.child("head"))
    freeze_backbone(model)
    plan = cfg.plan if cfg.train.mode == "adapter" else None
    if plan is not None:
        attach_adapters(model, plan, rng.child("adapters"))
    select_trainables(model, cfg.train.mode)
    expected = count_trainable_params(model.config, plan, n_classes, cfg.train.mode)
    live = enumerate_trainable_params(model)
    if live != expected:
        raise ContractError(f"trainable parameter count {live} does not match the closed form {expected}")
    return model, expected


def _describe(cfg):
    if cfg.train.mode != "adapter":
        return {"position": "-", "rank": 0, "init": "-", "scaling": "-", "norm": False}
    primary = cfg.plan.primary
    return {
        "position": primary.position,
        "rank": primary.rank,
        "init": primary.init,
        "scaling": primary.scaling_label,
        "norm": primary.use_layernorm,
    }


def run_seed(cfg, seed, label=None, study="train", workers=None):
    """Train and score one seed; ``workers`` caps the batch-assembly threads."""
    data = transfer_data(cfg)
    cpu_start = psutil.cpu_percent()
    mem_start = psutil.virtual_memory().percent
    started = time.time()

    model, params = prepare_model(cfg, seed, data.train.class_count)
    train_set = data.train.merge(data.val) if cfg["experiment.include_val_in_train"] else data.train
    norm = normalization_spec(cfg["data.normalization"])
    train_pipeline = Pipeline(cfg.augmentation, norm)
    eval_pipeline = Pipeline(AugmentationSpec("vtab", cfg["backbone.image_size"]), norm)
    result = fit(model, train_set, cfg.train, Rng(seed).child("train"), train_pipeline, workers=workers)
    val_acc = evaluate(model, data.val, eval_pipeline, workers=workers)
    test_acc = evaluate(model, data.test, eval_pipeline, workers=workers)

    if cfg["experiment.checkpoint_dir"]:
        out = Path(cfg["experiment.checkpoint_dir"]) / f"{cfg.config_hash}-seed{seed}.ckpt"
        save_checkpoint(model, out, sections=("adapters", "head"))

    return ResultRecord(
        config_hash=cfg.config_hash,
        seed=seed,
        label=label or cfg.name,
        params=params,
        val_acc=val_acc,
        test_acc=test_acc,
        seconds=time.time() - started,
        data_norm=cfg["data.normalization"],
        study=study,
        epoch_losses=result.losses,
        cpu_percent=psutil.cpu_percent() - cpu_start,
        mem_percent=psutil.virtual_memory().percent - mem_start,
        **_describe(cfg),
    )


def run_experiment(cfg, label=None, study="train"):
    """One ResultRecord per seed, ordered by seed.

    Seeds run on up to ``worker_cap()`` threads and share that cap for batch
    assembly, so the total thread count stays within it.
    """
    set_default_dtype(cfg["experiment.precision"])
    pretrained_backbone(cfg)
    transfer_data(cfg)
    seeds = list(cfg.seeds)
    cap = worker_cap()
    workers = min(cap, len(seeds))
    batch_workers = max(1, cap // max(workers, 1))
    logger.info("running %s (%s) over seeds %s on %d worker(s), %d batch thread(s) each",
                label or cfg.name, cfg.config_hash, seeds, workers, batch_workers)
    if workers <= 1:
        records = [run_seed(cfg, seed, label, study, batch_workers) for seed in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            records = list(executor.map(lambda s: run_seed(cfg, s, label, study, batch_workers), seeds))
    return sorted(records, key=lambda r: r.seed)


def evaluate_checkpoint(cfg, checkpoint, label=None):
    """Overlay an adapter + head checkpoint on the pretrained backbone and score it."""
    set_default_dtype(cfg["experiment.precision"])
    data = transfer_data(cfg)
    started = time.time()
    model = load_checkpoint(checkpoint, into=pretrained_backbone(cfg).clone())
    eval_pipeline = Pipeline(AugmentationSpec("vtab", cfg["backbone.image_size"]), normalization_spec(cfg["data.normalization"]))
    plan_cfg = model.plan.primary if model.plan is not None else None
    return ResultRecord(
        config_hash=cfg.config_hash,
        seed=-1,
        label=label or Path(checkpoint).stem,
        position=plan_cfg.position if plan_cfg else "-",
        rank=plan_cfg.rank if plan_cfg else 0,
        init=plan_cfg.init if plan_cfg else "-",
        scaling=plan_cfg.scaling_label if plan_cfg else "-",
        norm=plan_cfg.use_layernorm if plan_cfg else False,
        params=enumerate_trainable_params(model),
        val_acc=evaluate(model, data.val, eval_pipeline),
        test_acc=evaluate(model, data.test, eval_pipeline),
        seconds=time.time() - started,
        data_norm=cfg["data.normalization"],
        study="eval",
    )
