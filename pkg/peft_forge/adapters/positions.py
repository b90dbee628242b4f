"""Adapter insertion positions around the FFN, and the adapted transformer layer."""
from dataclasses import dataclass

from peft_forge.adapters.config import POSITIONS
from peft_forge.adapters.module import adapter_forward
from peft_forge.errors import ConfigurationError
from peft_forge.vit.layers import attention_branch, ffn_branch
from peft_forge.vit.regularization import apply_stochastic_depth


@dataclass(eq=False)
class AdapterSites:
    """The adapters attached to one transformer layer."""

    ffn: object = None
    attention: object = None

    def parameters(self):
        found = []
        for module in (self.attention, self.ffn):
            if module is not None:
                found.extend(module.parameters())
        return found


def _child(rng, *keys):
    return rng.child(*keys) if rng is not None else None


def _adapter_branch(x, module, train_mode, rng):
    """A(x) with drop-path on the whole branch."""
    out = adapter_forward(x, module, module.config, train_mode, _child(rng, "dropout"))
    return apply_stochastic_depth(out, module.config.drop_path_rate, train_mode, _child(rng, "drop_path"))


def wire_position(x, layer, module, position=None, train_mode=False, rng=None, drop_rate=None):
    """FFN sublayer of ``layer`` with ``module`` inserted at ``position``.

    ``x`` is the residual stream after the attention sublayer. The FFN
    includes its preceding layer norm. The backbone's drop-path wraps the
    FFN residual branch and the adapter's own drop-path wraps A(.).
    """
    position = position or module.config.position
    rate = layer.drop_path_rate if drop_rate is None else drop_rate
    ffn_rng = _child(rng, "ffn")
    adapter_rng = _child(rng, "adapter", "ffn")

    def ffn_residual(branch):
        return apply_stochastic_depth(branch, rate, train_mode, ffn_rng)

    def adapter(h):
        return _adapter_branch(h, module, train_mode, adapter_rng)

    if position == "pre":
        y = x + adapter(x)
        return y + ffn_residual(ffn_branch(y, layer))
    if position == "post":
        y = x + ffn_residual(ffn_branch(x, layer))
        return y + adapter(y)
    if position == "parallel":
        return x + ffn_residual(ffn_branch(x, layer)) + adapter(x)
    if position == "intermediate":
        f = ffn_branch(x, layer)
        return x + ffn_residual(f + adapter(f))
    if position == "intermediate-noskip":
        return x + ffn_residual(adapter(ffn_branch(x, layer)))
    raise ConfigurationError(f"unknown adapter position {position!r}, expected one of {POSITIONS}")


def wire_attention(x, layer, module, train_mode=False, rng=None, drop_rate=None):
    """Attention sublayer with an adapter on its output before the residual is added."""
    rate = layer.drop_path_rate if drop_rate is None else drop_rate
    a = attention_branch(x, layer)
    a = a + _adapter_branch(a, module, train_mode, _child(rng, "adapter", "attn"))
    return x + apply_stochastic_depth(a, rate, train_mode, _child(rng, "attn"))


def adapted_layer_forward(x, layer, sites, train_mode=False, rng=None, drop_rate=None):
    """``layer_forward`` with the adapters in ``sites`` wired in."""
    rate = layer.drop_path_rate if drop_rate is None else drop_rate
    if sites.attention is not None:
        x = wire_attention(x, layer, sites.attention, train_mode, rng, rate)
    else:
        x = x + apply_stochastic_depth(attention_branch(x, layer), rate, train_mode, _child(rng, "attn"))
    if sites.ffn is not None:
        return wire_position(x, layer, sites.ffn, None, train_mode, rng, rate)
    return x + apply_stochastic_depth(ffn_branch(x, layer), rate, train_mode, _child(rng, "ffn"))
