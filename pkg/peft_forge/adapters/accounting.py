"""Exact trainable-parameter accounting, plus the benchmark task tables it is averaged over."""
from dataclasses import dataclass

from peft_forge.vit.config import count_backbone_params


def adapter_param_count(config, d):
    """Parameters of one adapter module of hidden size ``d``."""
    r = config.rank
    count = 2 * d * r
    if config.use_bias:
        count += r + d
    if config.use_layernorm:
        count += 2 * d
    if config.scaling == "learned-layer":
        count += 1
    elif config.scaling == "learned-channel":
        count += d
    return count


def head_param_count(d, n_classes):
    return d * n_classes + n_classes


def backbone_norm_param_count(backbone):
    """Every layer-norm of the backbone: two per layer plus the final one."""
    d = backbone.hidden_dim
    return backbone.num_layers * 4 * d + 2 * d


def count_trainable_params(backbone, plan, n_classes, mode="adapter"):
    """Trainable parameters for a tuning ``mode`` of ``linear``, ``adapter`` or ``full``.

    The classifier is always included. ``plan`` is only read in adapter mode.
    """
    d = backbone.hidden_dim
    head = head_param_count(d, n_classes)
    if mode == "linear":
        return head
    if mode == "full":
        return count_backbone_params(backbone) + head
    per_layer = sum(adapter_param_count(site, d) for site in (plan.ffn, plan.attention) if site is not None)
    total = backbone.num_layers * per_layer + head
    if plan.tune_backbone_norms:
        total += backbone_norm_param_count(backbone)
    return total


def enumerate_trainable_params(model):
    """Count by walking the instantiated model's trainable Parameters."""
    return sum(p.numel for p in model.parameters() if p.trainable)


# ---------------- benchmark task tables ----------------
@dataclass(frozen=True)
class TaskInfo:
    name: str
    group: str
    classes: int
    train: int
    val: int
    test: int


def _vtab(name, group, classes, test):
    return TaskInfo(name, group, classes, 800, 200, test)


VTAB_TASKS = (
    _vtab("cifar100", "natural", 100, 10000),
    _vtab("caltech101", "natural", 102, 6084),
    _vtab("dtd", "natural", 47, 1880),
    _vtab("flowers102", "natural", 102, 6149),
    _vtab("pets", "natural", 37, 3669),
    _vtab("svhn", "natural", 10, 26032),
    _vtab("sun397", "natural", 397, 21750),
    _vtab("camelyon", "specialized", 2, 32768),
    _vtab("eurosat", "specialized", 10, 5400),
    _vtab("resisc45", "specialized", 45, 6300),
    _vtab("retinopathy", "specialized", 5, 42670),
    _vtab("clevr-count", "structured", 8, 15000),
    _vtab("clevr-dist", "structured", 6, 15000),
    _vtab("dmlab", "structured", 6, 22735),
    _vtab("kitti-dist", "structured", 4, 711),
    _vtab("dsprites-loc", "structured", 16, 73728),
    _vtab("dsprites-ori", "structured", 16, 73728),
    _vtab("smallnorb-azi", "structured", 18, 12150),
    _vtab("smallnorb-ele", "structured", 9, 12150),
)

FGVC_TASKS = (
    TaskInfo("cub200", "fgvc", 200, 5394, 600, 5794),
    TaskInfo("nabirds", "fgvc", 555, 21536, 2393, 6084),
    TaskInfo("oxford-flowers", "fgvc", 102, 1020, 1020, 6149),
    TaskInfo("stanford-dogs", "fgvc", 120, 10800, 1200, 8580),
    TaskInfo("stanford-cars", "fgvc", 196, 7329, 815, 8041),
)

TASK_SUITES = {"vtab": VTAB_TASKS, "fgvc": FGVC_TASKS}

# per-task Adapter+ ranks chosen on validation data, in task-table order
OPTIMIZED_RANKS = {
    "vtab-r1-4": (1, 4, 2, 1, 4, 4, 1, 4, 2, 4, 2, 4, 2, 4, 4, 4, 4, 4, 4),
    "vtab-r1-8": (1, 4, 2, 1, 8, 8, 1, 8, 2, 8, 8, 4, 8, 8, 8, 8, 4, 8, 8),
    "vtab-r1-32": (1, 4, 2, 1, 8, 16, 1, 16, 2, 32, 32, 4, 8, 8, 8, 32, 4, 32, 8),
    "fgvc-r1-32": (2, 2, 1, 1, 32),
}


def average_trainable_params(backbone, plan, tasks, ranks=None, mode="adapter"):
    """Mean exact trainable count over ``tasks``, each with its own classifier.

    ``ranks`` optionally gives one adapter rank per task.
    """
    tasks = list(tasks)
    if ranks is not None and len(ranks) != len(tasks):
        raise ValueError(f"{len(ranks)} ranks for {len(tasks)} tasks")
    total = 0
    for i, task in enumerate(tasks):
        task_plan = plan.with_rank(ranks[i]) if ranks is not None else plan
        total += count_trainable_params(backbone, task_plan, task.classes, mode)
    return total / len(tasks)


def optimized_rank_params(table, plan, backbone):
    """Average trainable count of an optimized-rank variant, e.g. ``table="vtab-r1-8"``."""
    suite = TASK_SUITES[table.split("-", 1)[0]]
    return average_trainable_params(backbone, plan, suite, ranks=OPTIMIZED_RANKS[table])
