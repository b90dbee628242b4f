"""Vision-transformer backbone.

The model and checkpoint modules sit on top of the adapter package and are
imported from ``peft_forge.vit.model`` / ``peft_forge.vit.checkpoint``.
"""
from peft_forge.vit.config import BackboneConfig, count_backbone_params
from peft_forge.vit.layers import (
    PatchEmbedding,
    TransformerLayer,
    attention_forward,
    ffn_forward,
    layer_forward,
    patch_embed,
)
from peft_forge.vit.regularization import apply_stochastic_depth, dropout, stochastic_depth_rate

__all__ = [
    "BackboneConfig",
    "PatchEmbedding",
    "TransformerLayer",
    "apply_stochastic_depth",
    "attention_forward",
    "count_backbone_params",
    "dropout",
    "ffn_forward",
    "layer_forward",
    "patch_embed",
    "stochastic_depth_rate",
]
