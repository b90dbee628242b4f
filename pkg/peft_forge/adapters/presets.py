"""Adapter configurations of published adapter methods, as placement plans."""
from peft_forge.adapters.config import AdapterConfig, AdapterPlan
from peft_forge.errors import ConfigurationError

PRESETS = ("adapter-plus", "houlsby", "pfeiffer", "adaptformer")

ADAPTFORMER_SCALE = 0.1


def preset_config(name, rank=8, drop_path_rate=0.0):
    """Expand a preset name into an AdapterPlan.

    - adapter-plus: post position, learned channel scaling, Houlsby init, no LN.
    - houlsby: intermediate adapters after attention and FFN, backbone norms tuned.
    - pfeiffer: post position, BERT init, internal LN.
    - adaptformer: parallel position, fixed scale 0.1, LoRA init.
    """
    if name == "adapter-plus":
        ffn = AdapterConfig(rank=rank, scaling="learned-channel", init="houlsby", position="post",
                            drop_path_rate=drop_path_rate)
        return AdapterPlan(ffn=ffn, name=name)
    if name == "houlsby":
        site = AdapterConfig(rank=rank, init="houlsby", position="intermediate", drop_path_rate=drop_path_rate)
        return AdapterPlan(ffn=site, attention=site, tune_backbone_norms=True, name=name)
    if name == "pfeiffer":
        ffn = AdapterConfig(rank=rank, use_layernorm=True, init="bert", position="post",
                            drop_path_rate=drop_path_rate)
        return AdapterPlan(ffn=ffn, name=name)
    if name == "adaptformer":
        ffn = AdapterConfig(rank=rank, scaling="fixed", scale_value=ADAPTFORMER_SCALE, init="lora",
                            position="parallel", drop_path_rate=drop_path_rate)
        return AdapterPlan(ffn=ffn, name=name)
    raise ConfigurationError(f"unknown preset {name!r}, expected one of {PRESETS}")
