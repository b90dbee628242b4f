"""Bottleneck adapter parameters and forward pass."""
import math
from dataclasses import dataclass

from peft_forge.adapters.config import AdapterConfig
from peft_forge.autodiff import ops
from peft_forge.autodiff.init import (
    ones,
    sample_kaiming_uniform,
    sample_truncated_normal,
    sample_uniform_bias,
    zeros,
)
from peft_forge.autodiff.parameter import Parameter
from peft_forge.autodiff.tensor import default_dtype
from peft_forge.errors import ContractError
from peft_forge.vit.regularization import dropout

HOULSBY_SIGMA = 0.01
BERT_SIGMA = 0.02


@dataclass(eq=False)
class AdapterModule:
    config: AdapterConfig
    down_w: Parameter
    up_w: Parameter
    down_b: Parameter = None
    up_b: Parameter = None
    ln_gamma: Parameter = None
    ln_beta: Parameter = None
    scale: Parameter = None

    def parameters(self):
        ordered = (self.ln_gamma, self.ln_beta, self.down_w, self.down_b, self.up_w, self.up_b, self.scale)
        return [p for p in ordered if p is not None]

    @property
    def numel(self):
        return sum(p.numel for p in self.parameters())


def _projections(config, d, rng, dtype):
    r = config.rank
    if config.init == "houlsby":
        down = sample_truncated_normal(rng.child("down_w"), HOULSBY_SIGMA, 2 * HOULSBY_SIGMA, (d, r), dtype=dtype)
        up = sample_truncated_normal(rng.child("up_w"), HOULSBY_SIGMA, 2 * HOULSBY_SIGMA, (r, d), dtype=dtype)
        return down, zeros((r,), dtype=dtype), up
    if config.init == "bert":
        down = sample_truncated_normal(rng.child("down_w"), BERT_SIGMA, math.inf, (d, r), dtype=dtype)
        up = sample_truncated_normal(rng.child("up_w"), BERT_SIGMA, math.inf, (r, d), dtype=dtype)
        return down, zeros((r,), dtype=dtype), up
    if config.init == "lora":
        down = sample_kaiming_uniform(rng.child("down_w"), d, (d, r), dtype=dtype)
        return down, sample_uniform_bias(rng.child("down_b"), d, (r,), dtype=dtype), zeros((r, d), dtype=dtype)
    # zero-degenerate
    return zeros((d, r), dtype=dtype), zeros((r,), dtype=dtype), zeros((r, d), dtype=dtype)


def init_adapter(config, d, rng, prefix="adapter", dtype=None):
    """Create an adapter for hidden size ``d`` with exactly the parameters ``config`` implies.

    Up-projection biases always start at zero. Learned scales start at 1 and
    the internal layer norm at gamma=1, beta=0, for every init scheme.
    """
    if config.rank > d:
        raise ContractError(f"adapter rank {config.rank} exceeds hidden size {d}")
    dtype = dtype or default_dtype()
    down, down_b, up = _projections(config, d, rng, dtype)

    module = AdapterModule(
        config=config,
        down_w=Parameter(f"{prefix}.down_w", down),
        up_w=Parameter(f"{prefix}.up_w", up),
    )
    if config.use_bias:
        module.down_b = Parameter(f"{prefix}.down_b", down_b)
        module.up_b = Parameter(f"{prefix}.up_b", zeros((d,), dtype=dtype))
    if config.use_layernorm:
        module.ln_gamma = Parameter(f"{prefix}.ln.gamma", ones((d,), dtype=dtype), no_decay=True)
        module.ln_beta = Parameter(f"{prefix}.ln.beta", zeros((d,), dtype=dtype), no_decay=True)
    if config.scaling == "learned-layer":
        module.scale = Parameter(f"{prefix}.scale", ones((1,), dtype=dtype), no_decay=True)
    elif config.scaling == "learned-channel":
        module.scale = Parameter(f"{prefix}.scale", ones((d,), dtype=dtype), no_decay=True)
    return module


def _tensor(param):
    return param.tensor if param is not None else None


def adapter_forward(x, module, config=None, train_mode=False, rng=None):
    """Adapter branch output, without any skip connection.

    Optional layer norm, down-projection, GELU, up-projection, then the
    configured scaling.
    """
    config = config or module.config
    h = x
    if config.use_layernorm:
        h = ops.layer_norm(h, module.ln_gamma.tensor, module.ln_beta.tensor)
    h = ops.gelu(ops.linear(h, module.down_w.tensor, _tensor(module.down_b)))
    h = dropout(h, config.dropout_rate, train_mode, rng)
    out = ops.linear(h, module.up_w.tensor, _tensor(module.up_b))
    if config.scaling == "fixed":
        return out * config.scale_value
    if config.scaling in ("learned-layer", "learned-channel"):
        return out * module.scale.tensor
    return out
