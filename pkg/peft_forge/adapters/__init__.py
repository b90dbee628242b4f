"""Bottleneck adapters: structure options, insertion positions, presets and parameter accounting."""
from peft_forge.adapters.accounting import (
    FGVC_TASKS,
    OPTIMIZED_RANKS,
    VTAB_TASKS,
    average_trainable_params,
    count_trainable_params,
    enumerate_trainable_params,
)
from peft_forge.adapters.attach import attach_adapters, detach_adapters
from peft_forge.adapters.config import INITS, POSITIONS, SCALINGS, AdapterConfig, AdapterPlan
from peft_forge.adapters.module import AdapterModule, adapter_forward, init_adapter
from peft_forge.adapters.positions import AdapterSites, adapted_layer_forward, wire_attention, wire_position
from peft_forge.adapters.presets import PRESETS, preset_config

__all__ = [
    "FGVC_TASKS",
    "INITS",
    "OPTIMIZED_RANKS",
    "POSITIONS",
    "PRESETS",
    "SCALINGS",
    "VTAB_TASKS",
    "AdapterConfig",
    "AdapterModule",
    "AdapterPlan",
    "AdapterSites",
    "adapted_layer_forward",
    "adapter_forward",
    "attach_adapters",
    "average_trainable_params",
    "count_trainable_params",
    "detach_adapters",
    "enumerate_trainable_params",
    "init_adapter",
    "preset_config",
    "wire_attention",
    "wire_position",
]
