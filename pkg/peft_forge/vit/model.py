"""The full classifier: backbone, optional adapters and a linear head."""
import copy
import logging

import numpy as np

from peft_forge.adapters.positions import adapted_layer_forward
from peft_forge.autodiff import ops
from peft_forge.autodiff.init import ones, sample_truncated_normal, zeros
from peft_forge.autodiff.parameter import Parameter
from peft_forge.autodiff.tensor import default_dtype
from peft_forge.errors import ContractError
from peft_forge.vit.config import count_backbone_params
from peft_forge.vit.layers import PatchEmbedding, TransformerLayer, layer_forward, patch_embed
from peft_forge.vit.regularization import stochastic_depth_rate

logger = logging.getLogger(__name__)

HEAD_SIGMA = 0.01

__all__ = ["VisionTransformer", "count_backbone_params", "freeze_backbone", "reset_head"]


class VisionTransformer:
    """ViT classifier with parameters registered under ``backbone.*``, ``adapters.*`` and ``head.*``."""

    def __init__(self, config, n_classes, rng, dtype=None):
        if n_classes < 1:
            raise ContractError(f"n_classes must be >= 1, got {n_classes}")
        self.config = config
        self.dtype = np.dtype(dtype or default_dtype())
        backbone_rng = rng.child("backbone")
        self.embedding = PatchEmbedding.build(config, backbone_rng.child("embed"), self.dtype)
        self.layers = [
            TransformerLayer.build(
                config,
                i,
                stochastic_depth_rate(i, config.num_layers, config.drop_path_max),
                backbone_rng.child("layer", i),
                self.dtype,
            )
            for i in range(config.num_layers)
        ]
        d = config.hidden_dim
        self.norm_gamma = Parameter("backbone.norm.gamma", ones((d,), dtype=self.dtype), no_decay=True)
        self.norm_beta = Parameter("backbone.norm.beta", zeros((d,), dtype=self.dtype), no_decay=True)
        self.adapters = {}
        self.plan = None
        self._build_head(n_classes, rng.child("head"))

    def _build_head(self, n_classes, rng):
        d = self.config.hidden_dim
        self.n_classes = n_classes
        weight = sample_truncated_normal(rng, HEAD_SIGMA, 2 * HEAD_SIGMA, (d, n_classes), dtype=self.dtype)
        self.head_w = Parameter("head.w", weight)
        self.head_b = Parameter("head.b", zeros((n_classes,), dtype=self.dtype))

    # ---------------- parameter registry ----------------
    def backbone_parameters(self):
        params = list(self.embedding.parameters())
        for layer in self.layers:
            params.extend(layer.parameters())
        params.extend([self.norm_gamma, self.norm_beta])
        return params

    def backbone_norm_parameters(self):
        params = []
        for layer in self.layers:
            params.extend(layer.norm_parameters())
        params.extend([self.norm_gamma, self.norm_beta])
        return params

    def adapter_parameters(self):
        params = []
        for i in sorted(self.adapters):
            params.extend(self.adapters[i].parameters())
        return params

    def head_parameters(self):
        return [self.head_w, self.head_b]

    def parameters(self):
        return self.backbone_parameters() + self.adapter_parameters() + self.head_parameters()

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.trainable]

    def num_parameters(self):
        return sum(p.numel for p in self.parameters())

    # ---------------- forward ----------------
    def features(self, images, train_mode=False, rng=None):
        """Final-norm CLS token, ``[b, d]``."""
        x = patch_embed(images, self.embedding, self.config)
        if x.ndim == 2:
            x = x.reshape(1, *x.shape)
        for layer in self.layers:
            layer_rng = rng.child("layer", layer.layer_index) if rng is not None else None
            sites = self.adapters.get(layer.layer_index)
            if sites is not None:
                x = adapted_layer_forward(x, layer, sites, train_mode, layer_rng)
            else:
                x = layer_forward(x, layer, train_mode, layer_rng)
        cls = x[:, 0, :]
        return ops.layer_norm(cls, self.norm_gamma.tensor, self.norm_beta.tensor)

    def forward(self, images, train_mode=False, rng=None):
        """Logits ``[b, c]`` for ``[b, 3, H, W]`` images (a single ``[3, H, W]`` image gives b=1)."""
        return ops.linear(self.features(images, train_mode, rng), self.head_w.tensor, self.head_b.tensor)

    __call__ = forward

    def clone(self):
        """Independent deep copy, graph-free."""
        for p in self.parameters():
            p.tensor.grad = None
        return copy.deepcopy(self)

    def __repr__(self):
        plan = self.plan.name if self.plan is not None else "none"
        return (
            f"VisionTransformer(d={self.config.hidden_dim}, layers={self.config.num_layers}, "
            f"classes={self.n_classes}, adapters={plan}, dtype={self.dtype})"
        )


def freeze_backbone(model):
    """Mark every backbone parameter non-trainable; head and adapters are untouched."""
    for p in model.backbone_parameters():
        p.set_trainable(False)
    return model


def reset_head(model, n_classes, rng):
    """Replace the classifier with a fresh one for ``n_classes`` (truncated normal sigma=0.01, zero bias)."""
    model._build_head(n_classes, rng)
    logger.debug("reset head to %d classes", n_classes)
    return model
