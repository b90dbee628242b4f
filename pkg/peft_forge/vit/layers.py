"""Transformer building blocks: patch embedding, attention, FFN and the pre-norm layer.

Every forward accepts a single token sequence ``[n, d]`` or a batch
``[b, n, d]``; the leading axes are carried through unchanged.
"""
import math
from dataclasses import dataclass

import numpy as np

from peft_forge.autodiff import ops
from peft_forge.autodiff.init import ones, sample_truncated_normal, zeros
from peft_forge.autodiff.parameter import Parameter
from peft_forge.autodiff.tensor import Tensor, as_tensor
from peft_forge.errors import DimensionError
from peft_forge.vit.regularization import apply_stochastic_depth

WEIGHT_SIGMA = 0.02


def _weight(name, rng, shape, dtype):
    return Parameter(name, sample_truncated_normal(rng, WEIGHT_SIGMA, 2 * WEIGHT_SIGMA, shape, dtype=dtype))


def _bias(name, size, dtype):
    return Parameter(name, zeros((size,), dtype=dtype))


def _norm_pair(prefix, size, dtype):
    return (
        Parameter(f"{prefix}.gamma", ones((size,), dtype=dtype), no_decay=True),
        Parameter(f"{prefix}.beta", zeros((size,), dtype=dtype), no_decay=True),
    )


# ---------------- patch embedding ----------------
@dataclass(eq=False)
class PatchEmbedding:
    proj_w: Parameter
    proj_b: Parameter
    cls_token: Parameter
    pos_embed: Parameter

    @classmethod
    def build(cls, config, rng, dtype, prefix="backbone.embed"):
        d = config.hidden_dim
        return cls(
            proj_w=_weight(f"{prefix}.proj_w", rng.child("proj_w"), (config.patch_dim, d), dtype),
            proj_b=_bias(f"{prefix}.proj_b", d, dtype),
            cls_token=_weight(f"{prefix}.cls_token", rng.child("cls_token"), (1, d), dtype),
            pos_embed=_weight(f"{prefix}.pos_embed", rng.child("pos_embed"), (config.num_tokens, d), dtype),
        )

    def parameters(self):
        return [self.proj_w, self.proj_b, self.cls_token, self.pos_embed]


def extract_patches(images, config):
    """``[b, 3, H, W]`` pixels to ``[b, P, 3*p*p]`` flattened non-overlapping patches."""
    b = images.shape[0]
    g, p, c = config.grid, config.patch_size, config.channels
    blocks = images.reshape(b, c, g, p, g, p).transpose(0, 2, 4, 1, 3, 5)
    return blocks.reshape(b, g * g, c * p * p)


def patch_embed(images, embedding, config):
    """Project patches, prepend the CLS token and add positional encodings.

    ``images`` is ``[3, H, W]`` (returns ``[n, d]``) or ``[b, 3, H, W]``
    (returns ``[b, n, d]``).
    """
    pixels = images.data if isinstance(images, Tensor) else np.asarray(images)
    single = pixels.ndim == 3
    if single:
        pixels = pixels[None]
    expected = (config.channels, config.image_size, config.image_size)
    if pixels.ndim != 4 or pixels.shape[1:] != expected:
        raise DimensionError("patch_embed", pixels.shape, expected)

    dtype = embedding.proj_w.tensor.dtype
    patches = as_tensor(extract_patches(pixels.astype(dtype, copy=False), config))
    tokens = ops.linear(patches, embedding.proj_w.tensor, embedding.proj_b.tensor)
    cls_rows = ops.add(as_tensor(np.zeros((pixels.shape[0], 1, config.hidden_dim), dtype=dtype)), embedding.cls_token.tensor)
    x = ops.add(ops.concat([cls_rows, tokens], axis=1), embedding.pos_embed.tensor)
    return x[0] if single else x


# ---------------- transformer layer ----------------
@dataclass(eq=False)
class TransformerLayer:
    layer_index: int
    num_heads: int
    drop_path_rate: float
    wq: Parameter
    bq: Parameter
    wk: Parameter
    bk: Parameter
    wv: Parameter
    bv: Parameter
    wo: Parameter
    bo: Parameter
    w1: Parameter
    b1: Parameter
    w2: Parameter
    b2: Parameter
    ln1_gamma: Parameter
    ln1_beta: Parameter
    ln2_gamma: Parameter
    ln2_beta: Parameter

    @classmethod
    def build(cls, config, layer_index, drop_path_rate, rng, dtype):
        d, f = config.hidden_dim, config.ffn_dim
        prefix = f"backbone.layers.{layer_index}"
        ln1_gamma, ln1_beta = _norm_pair(f"{prefix}.ln1", d, dtype)
        ln2_gamma, ln2_beta = _norm_pair(f"{prefix}.ln2", d, dtype)
        weights = {}
        for name, shape in (("wq", (d, d)), ("wk", (d, d)), ("wv", (d, d)), ("wo", (d, d)), ("w1", (d, f)), ("w2", (f, d))):
            weights[name] = _weight(f"{prefix}.{name}", rng.child(name), shape, dtype)
        biases = {name: _bias(f"{prefix}.{name}", size, dtype) for name, size in (("bq", d), ("bk", d), ("bv", d), ("bo", d), ("b1", f), ("b2", d))}
        return cls(
            layer_index=layer_index,
            num_heads=config.num_heads,
            drop_path_rate=drop_path_rate,
            ln1_gamma=ln1_gamma,
            ln1_beta=ln1_beta,
            ln2_gamma=ln2_gamma,
            ln2_beta=ln2_beta,
            **weights,
            **biases,
        )

    def parameters(self):
        return [
            self.ln1_gamma, self.ln1_beta,
            self.wq, self.bq, self.wk, self.bk, self.wv, self.bv, self.wo, self.bo,
            self.ln2_gamma, self.ln2_beta,
            self.w1, self.b1, self.w2, self.b2,
        ]

    def norm_parameters(self):
        return [self.ln1_gamma, self.ln1_beta, self.ln2_gamma, self.ln2_beta]


def _split_heads(x, heads):
    *lead, n, d = x.shape
    return x.reshape(*lead, n, heads, d // heads).swapaxes(-3, -2)


def _merge_heads(x):
    *lead, heads, n, head_dim = x.shape
    return x.swapaxes(-3, -2).reshape(*lead, n, heads * head_dim)


def attention_forward(x, layer):
    """Multi-head self-attention ``softmax(QK^T / sqrt(d')) V`` followed by the output projection."""
    heads = layer.num_heads
    q = _split_heads(ops.linear(x, layer.wq.tensor, layer.bq.tensor), heads)
    k = _split_heads(ops.linear(x, layer.wk.tensor, layer.bk.tensor), heads)
    v = _split_heads(ops.linear(x, layer.wv.tensor, layer.bv.tensor), heads)
    scale = 1.0 / math.sqrt(q.shape[-1])
    weights = ops.softmax_lastdim(ops.matmul(q, k.swapaxes(-1, -2)) * scale)
    return ops.linear(_merge_heads(ops.matmul(weights, v)), layer.wo.tensor, layer.bo.tensor)


def ffn_forward(x, layer):
    """``GELU(x W1 + b1) W2 + b2``."""
    hidden = ops.gelu(ops.linear(x, layer.w1.tensor, layer.b1.tensor))
    return ops.linear(hidden, layer.w2.tensor, layer.b2.tensor)


def attention_branch(x, layer):
    """Attention sublayer with its preceding layer norm, before the residual."""
    return attention_forward(ops.layer_norm(x, layer.ln1_gamma.tensor, layer.ln1_beta.tensor), layer)


def ffn_branch(x, layer):
    """FFN sublayer with its preceding layer norm, before the residual."""
    return ffn_forward(ops.layer_norm(x, layer.ln2_gamma.tensor, layer.ln2_beta.tensor), layer)


def layer_forward(x, layer, train_mode=False, rng=None, drop_rate=None):
    """Pre-norm transformer layer; each residual branch is subject to stochastic depth.

    ``drop_rate`` overrides the layer's own drop-path rate.
    """
    rate = layer.drop_path_rate if drop_rate is None else drop_rate
    attn_rng = rng.child("attn") if rng is not None else None
    ffn_rng = rng.child("ffn") if rng is not None else None
    x = x + apply_stochastic_depth(attention_branch(x, layer), rate, train_mode, attn_rng)
    return x + apply_stochastic_depth(ffn_branch(x, layer), rate, train_mode, ffn_rng)
