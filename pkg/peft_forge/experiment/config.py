"""Strict experiment configuration files.

One ``section.key = value`` per line, ``#`` starts a comment. Every key
is declared in SCHEMA with a type and a default; unknown keys, missing
required keys and values of the wrong type are rejected with the offending
key path.
"""
import hashlib
import math
from dataclasses import dataclass, replace
from pathlib import Path

from peft_forge.adapters.config import POSITIONS, INITS, SCALINGS, AdapterConfig, AdapterPlan
from peft_forge.adapters.presets import PRESETS, preset_config
from peft_forge.data.normalization import PRESETS as NORMALIZATIONS
from peft_forge.data.synthetic import TransferShift
from peft_forge.data.transforms import POLICIES, AugmentationSpec
from peft_forge.errors import ConfigParseError, ConfigurationError, ContractError
from peft_forge.training.config import MODES, TrainConfig
from peft_forge.vit.config import BackboneConfig

REQUIRED = object()
AUTO = "auto"


@dataclass(frozen=True)
class Field:
    kind: str
    default: object
    choices: tuple = None


SCHEMA = {
    # ---------------- experiment ----------------
    "experiment.name": Field("str", REQUIRED),
    "experiment.seeds": Field("ints", (0, 1, 2, 3, 4)),
    "experiment.output": Field("str", ""),
    "experiment.format": Field("str", "csv", ("csv", "json")),
    "experiment.precision": Field("str", "f32", ("f32", "f64")),
    "experiment.include_val_in_train": Field("bool", False),
    "experiment.pretrain_seed": Field("int", 0),
    "experiment.pretrain_epochs": Field("int", 10),
    "experiment.pretrain_lr": Field("float", 1e-3),
    "experiment.backbone_checkpoint": Field("str", ""),
    "experiment.checkpoint_dir": Field("str", ""),
    # ---------------- backbone ----------------
    "backbone.image_size": Field("int", 32),
    "backbone.patch_size": Field("int", 8),
    "backbone.hidden_dim": Field("int", 64),
    "backbone.num_layers": Field("int", 4),
    "backbone.num_heads": Field("int", 4),
    "backbone.ffn_expansion": Field("int", 4),
    "backbone.drop_path_max": Field("float", 0.1),
    # ---------------- adapter ----------------
    "adapter.preset": Field("str", "adapter-plus", ("custom", "none") + PRESETS),
    "adapter.rank": Field("int", 8),
    "adapter.position": Field("str", "post", POSITIONS),
    "adapter.init": Field("str", "houlsby", INITS),
    "adapter.scaling": Field("str", "learned-channel", SCALINGS + ("layer", "channel")),
    "adapter.scale_value": Field("float", 1.0),
    "adapter.bias": Field("bool", True),
    "adapter.layernorm": Field("bool", False),
    "adapter.drop_path": Field("float", 0.1),
    "adapter.dropout": Field("float", 0.0),
    # ---------------- train ----------------
    "train.mode": Field("str", "adapter", MODES),
    "train.base_lr": Field("float?", AUTO),
    "train.weight_decay": Field("float", 1e-4),
    "train.batch_size": Field("int", 64),
    "train.epochs": Field("int", 20),
    "train.warmup_epochs": Field("int", 2),
    "train.beta1": Field("float", 0.9),
    "train.beta2": Field("float", 0.999),
    "train.eps": Field("float", 1e-8),
    "train.decay_norm_and_scale": Field("bool", False),
    # ---------------- data ----------------
    "data.source": Field("str", REQUIRED, ("synthetic", "folder")),
    "data.path": Field("str", ""),
    "data.classes": Field("int", 10),
    "data.n_train": Field("int", 800),
    "data.n_val": Field("int", 200),
    "data.n_test": Field("int", 200),
    "data.seed": Field("int", 0),
    "data.shift_rotation": Field("float", 30.0),
    "data.shift_color": Field("float", 0.5),
    "data.shift_texture": Field("float", 0.3),
    "data.normalization": Field("str", "inception", tuple(NORMALIZATIONS)),
    "data.pretrain_normalization": Field("str", "inception", tuple(NORMALIZATIONS)),
    "data.augmentation": Field("str", "vtab", POLICIES),
}

# keys that do not change what a run computes
UNHASHED = ("experiment.seeds", "experiment.output", "experiment.format", "experiment.checkpoint_dir")

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _coerce(key, raw, field, line_no=None):
    text = str(raw).strip()
    try:
        if field.kind == "str":
            value = text
        elif field.kind == "int":
            value = int(text)
        elif field.kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(text)
        elif field.kind == "float?":
            value = AUTO if text.lower() == AUTO else float(text)
        elif field.kind == "bool":
            lowered = text.lower()
            if lowered not in _TRUE | _FALSE:
                raise ValueError(text)
            value = lowered in _TRUE
        elif field.kind == "ints":
            value = tuple(int(part) for part in text.split(",") if part.strip())
            if not value:
                raise ValueError(text)
        else:
            raise AssertionError(field.kind)
    except ValueError:
        raise ConfigParseError(key, f"expected {field.kind}, got {text!r}", line_no) from None
    if field.choices is not None and value not in field.choices:
        raise ConfigParseError(key, f"{value!r} is not one of {list(field.choices)}", line_no)
    return value


def _render(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ExperimentConfig:
    """A validated, fully-defaulted experiment description.

    ``values`` maps every SCHEMA key to its typed value. The typed views
    (``backbone``, ``train``, ``plan``, ...) are derived from it, so a run
    is a function of ``values`` alone.
    """

    def __init__(self, values, source="<memory>"):
        self.values = dict(values)
        self.source = source
        self._validate()

    def __getitem__(self, key):
        return self.values[key]

    def __repr__(self):
        return f"ExperimentConfig({self.name!r}, hash={self.config_hash}, source={self.source})"

    def _validate(self):
        for section, build in (("backbone", lambda: self.backbone), ("train", lambda: self.train),
                               ("adapter", lambda: self.plan), ("data", lambda: self.shift)):
            try:
                build()
            except (ConfigurationError, ContractError) as exc:
                raise ConfigParseError(section, str(exc)) from None
        if self.train.mode == "adapter" and self.plan is None:
            raise ConfigParseError("adapter.preset", "train.mode = adapter needs an adapter preset other than none")
        if self["data.source"] == "folder" and not self["data.path"]:
            raise ConfigParseError("data.path", "required when data.source = folder")
        if self["data.source"] == "synthetic" and self["data.classes"] < 2:
            raise ConfigParseError("data.classes", "a classification task needs at least 2 classes")

    # ---------------- typed views ----------------
    @property
    def name(self):
        return self["experiment.name"]

    @property
    def seeds(self):
        return self["experiment.seeds"]

    @property
    def backbone(self):
        return BackboneConfig(
            image_size=self["backbone.image_size"],
            patch_size=self["backbone.patch_size"],
            hidden_dim=self["backbone.hidden_dim"],
            num_layers=self["backbone.num_layers"],
            num_heads=self["backbone.num_heads"],
            ffn_expansion=self["backbone.ffn_expansion"],
            drop_path_max=self["backbone.drop_path_max"],
        )

    @property
    def train(self):
        base_lr = self["train.base_lr"]
        return TrainConfig(
            mode=self["train.mode"],
            base_lr=None if base_lr == AUTO else base_lr,
            weight_decay=self["train.weight_decay"],
            batch_size=self["train.batch_size"],
            total_epochs=self["train.epochs"],
            warmup_epochs=self["train.warmup_epochs"],
            beta1=self["train.beta1"],
            beta2=self["train.beta2"],
            eps=self["train.eps"],
            decay_norm_and_scale=self["train.decay_norm_and_scale"],
        )

    @property
    def plan(self):
        """AdapterPlan for the configured preset, or None for ``adapter.preset = none``."""
        preset = self["adapter.preset"]
        if preset == "none":
            return None
        if preset == "custom":
            ffn = AdapterConfig(
                rank=self["adapter.rank"],
                use_bias=self["adapter.bias"],
                use_layernorm=self["adapter.layernorm"],
                scaling=self["adapter.scaling"],
                scale_value=self["adapter.scale_value"],
                init=self["adapter.init"],
                position=self["adapter.position"],
                drop_path_rate=self["adapter.drop_path"],
                dropout_rate=self["adapter.dropout"],
            )
            return AdapterPlan(ffn=ffn)
        plan = preset_config(preset, rank=self["adapter.rank"], drop_path_rate=self["adapter.drop_path"])
        if self["adapter.dropout"]:
            plan = replace(
                plan,
                ffn=replace(plan.ffn, dropout_rate=self["adapter.dropout"]) if plan.ffn else None,
                attention=replace(plan.attention, dropout_rate=self["adapter.dropout"]) if plan.attention else None,
            )
        return plan

    @property
    def shift(self):
        return TransferShift(
            rotation=self["data.shift_rotation"],
            color=self["data.shift_color"],
            texture=self["data.shift_texture"],
        )

    @property
    def augmentation(self):
        return AugmentationSpec(self["data.augmentation"], self["backbone.image_size"])

    # ---------------- identity ----------------
    def canonical_lines(self, exclude=UNHASHED):
        return [f"{key} = {_render(self.values[key])}" for key in sorted(self.values) if key not in exclude]

    @property
    def config_hash(self):
        digest = hashlib.sha256("\n".join(self.canonical_lines()).encode("utf-8")).hexdigest()
        return digest[:12]

    def subset_hash(self, prefixes, exclude=()):
        """Hash over the keys starting with any of ``prefixes``."""
        lines = [line for line in self.canonical_lines(exclude=UNHASHED + tuple(exclude))
                 if line.startswith(tuple(prefixes))]
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()[:12]

    def to_text(self):
        return "\n".join(f"{key} = {_render(self.values[key])}" for key in SCHEMA) + "\n"

    def with_overrides(self, **overrides):
        """Copy with dotted keys replaced; keys use ``__`` for dots (``adapter__rank=4``) or a mapping."""
        return self.override({key.replace("__", "."): value for key, value in overrides.items()})

    def override(self, mapping):
        values = dict(self.values)
        for key, value in mapping.items():
            if key not in SCHEMA:
                raise ConfigParseError(key, "unknown key")
            values[key] = _coerce(key, _render(value), SCHEMA[key])
        return ExperimentConfig(values, source=self.source)


def parse_config_text(text, source="<string>"):
    values, seen = {}, {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(line, "expected 'key = value'", line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigParseError(key, "unknown key", line_no)
        if key in seen:
            raise ConfigParseError(key, f"duplicate key (first set on line {seen[key]})", line_no)
        seen[key] = line_no
        values[key] = _coerce(key, value, SCHEMA[key], line_no)
    for key, field in SCHEMA.items():
        if key in values:
            continue
        if field.default is REQUIRED:
            raise ConfigParseError(key, "required key missing")
        values[key] = field.default
    return ExperimentConfig(values, source=source)


def parse_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(str(path), f"cannot read config: {exc}") from exc
    return parse_config_text(text, source=str(path))


def default_config(name="default", source="synthetic", **overrides):
    """A config with every default and the required keys filled in."""
    config = parse_config_text(f"experiment.name = {name}\ndata.source = {source}\n")
    return config.with_overrides(**overrides) if overrides else config
