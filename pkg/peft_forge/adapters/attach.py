"""Attaching an AdapterPlan to every layer of a model."""
import logging

from peft_forge.adapters.module import init_adapter
from peft_forge.adapters.positions import AdapterSites

logger = logging.getLogger(__name__)


def attach_adapters(model, plan, rng):
    """Give every layer of ``model`` fresh adapters per ``plan``; replaces any existing ones."""
    d = model.config.hidden_dim
    dtype = model.dtype
    sites = {}
    for layer in model.layers:
        i = layer.layer_index
        prefix = f"adapters.layers.{i}"
        sites[i] = AdapterSites(
            ffn=init_adapter(plan.ffn, d, rng.child("adapter", i, "ffn"), f"{prefix}.ffn", dtype)
            if plan.ffn is not None else None,
            attention=init_adapter(plan.attention, d, rng.child("adapter", i, "attn"), f"{prefix}.attn", dtype)
            if plan.attention is not None else None,
        )
    model.adapters = sites
    model.plan = plan
    logger.debug("attached %s adapters to %d layers", plan.name, len(sites))
    return model


def detach_adapters(model):
    model.adapters = {}
    model.plan = None
    return model
