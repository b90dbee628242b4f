"""Stochastic depth (drop-path) and dropout."""
import numpy as np

from peft_forge.autodiff.ops import mask_multiply
from peft_forge.errors import ContractError


def stochastic_depth_rate(layer_index, num_layers, max_rate):
    """Drop rate growing linearly with depth, from 0 at the first layer to ``max_rate`` at the last."""
    if num_layers < 2:
        return 0.0
    return max_rate * layer_index / (num_layers - 1)


def _keep_mask(rate, shape, rng, dtype):
    if rate >= 1.0:
        return np.zeros(shape, dtype=dtype)
    if rng is None:
        raise ContractError("a train-mode drop with rate > 0 needs an rng")
    keep = 1.0 - rate
    return rng.bernoulli_keep(keep, shape).astype(dtype) / dtype.type(keep)


def apply_stochastic_depth(branch_output, rate, train_mode, rng):
    """Drop a residual branch per sample.

    Along the leading (batch) axis of a 3-d input each sample is dropped
    independently; a 2-d [n, d] input is one sample. Survivors are rescaled
    by 1 / (1 - rate). Outside train mode this is the identity.
    """
    if not train_mode or rate <= 0.0:
        return branch_output
    if branch_output.ndim >= 3:
        shape = (branch_output.shape[0],) + (1,) * (branch_output.ndim - 1)
    else:
        shape = (1,) * branch_output.ndim
    return mask_multiply(branch_output, _keep_mask(rate, shape, rng, branch_output.dtype))


def dropout(x, rate, train_mode, rng):
    """Elementwise dropout with inverted scaling."""
    if not train_mode or rate <= 0.0:
        return x
    return mask_multiply(x, _keep_mask(rate, x.shape, rng, x.dtype))
