"""Adapter structure options and placement plans."""
import math
from dataclasses import asdict, dataclass, replace

from peft_forge.errors import ConfigurationError

POSITIONS = ("pre", "post", "parallel", "intermediate", "intermediate-noskip")
INITS = ("houlsby", "bert", "lora", "zero-degenerate")
SCALINGS = ("none", "fixed", "learned-layer", "learned-channel")

_SCALING_ALIASES = {"layer": "learned-layer", "channel": "learned-channel"}


@dataclass(frozen=True)
class AdapterConfig:
    """One bottleneck adapter: structure, initialization and where it sits in the layer.

    ``scale_value`` is only read for ``scaling="fixed"``. ``dropout_rate``
    drops bottleneck activations; ``drop_path_rate`` drops the whole
    adapter branch per sample.
    """

    rank: int = 8
    use_bias: bool = True
    use_layernorm: bool = False
    scaling: str = "none"
    scale_value: float = 1.0
    init: str = "houlsby"
    position: str = "post"
    drop_path_rate: float = 0.0
    dropout_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "scaling", _SCALING_ALIASES.get(self.scaling, self.scaling))
        if self.rank < 1:
            raise ConfigurationError(f"adapter rank must be >= 1, got {self.rank}")
        if self.position not in POSITIONS:
            raise ConfigurationError(f"unknown adapter position {self.position!r}, expected one of {POSITIONS}")
        if self.init not in INITS:
            raise ConfigurationError(f"unknown adapter init {self.init!r}, expected one of {INITS}")
        if self.scaling not in SCALINGS:
            raise ConfigurationError(f"unknown adapter scaling {self.scaling!r}, expected one of {SCALINGS}")
        if self.scaling == "fixed" and not math.isfinite(self.scale_value):
            raise ConfigurationError(f"fixed scaling needs a finite scale, got {self.scale_value}")
        for name in ("drop_path_rate", "dropout_rate"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigurationError(f"adapter {name} must lie in [0, 1), got {value}")

    @property
    def scaling_label(self):
        if self.scaling == "fixed":
            return f"fixed({self.scale_value:g})"
        return self.scaling

    def with_rank(self, rank):
        return replace(self, rank=rank)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        return cls(**values)


@dataclass(frozen=True)
class AdapterPlan:
    """Where adapters go in every layer.

    ``ffn`` configures the adapter around the FFN sublayer (its position
    picks the wiring); ``attention`` an optional second adapter on the
    attention sublayer. ``tune_backbone_norms`` unfreezes every backbone
    layer-norm, the final one included.
    """

    ffn: AdapterConfig = None
    attention: AdapterConfig = None
    tune_backbone_norms: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.ffn is None and self.attention is None:
            raise ConfigurationError("an adapter plan needs at least one adapter site")

    @property
    def primary(self):
        return self.ffn if self.ffn is not None else self.attention

    def with_rank(self, rank):
        return replace(
            self,
            ffn=self.ffn.with_rank(rank) if self.ffn else None,
            attention=self.attention.with_rank(rank) if self.attention else None,
        )

    def to_dict(self):
        return {
            "name": self.name,
            "tune_backbone_norms": self.tune_backbone_norms,
            "ffn": self.ffn.to_dict() if self.ffn else None,
            "attention": self.attention.to_dict() if self.attention else None,
        }

    @classmethod
    def from_dict(cls, values):
        return cls(
            ffn=AdapterConfig.from_dict(values["ffn"]) if values.get("ffn") else None,
            attention=AdapterConfig.from_dict(values["attention"]) if values.get("attention") else None,
            tune_backbone_norms=bool(values.get("tune_backbone_norms", False)),
            name=values.get("name", "custom"),
        )
