"""Parameter samplers: truncated normal and Kaiming uniform."""
import math

import numpy as np

from peft_forge.autodiff.tensor import Tensor, default_dtype
from peft_forge.errors import ContractError


def sample_truncated_normal(rng, sigma, bound, shape, dtype=None):
    """Zero-mean normal draws with std ``sigma``, redrawn until |w| <= bound.

    ``bound=math.inf`` gives a plain, untruncated normal.
    """
    if sigma <= 0 or bound <= 0:
        raise ContractError(f"sigma and bound must be positive, got sigma={sigma}, bound={bound}")
    dtype = dtype or default_dtype()
    values = rng.normal(shape, sigma).astype(dtype)
    if math.isinf(bound):
        return Tensor(values, dtype=dtype)
    outside = np.abs(values) > bound
    while outside.any():
        values[outside] = rng.normal(int(outside.sum()), sigma).astype(dtype)
        outside = np.abs(values) > bound
    return Tensor(values, dtype=dtype)


def kaiming_uniform_bound(fan_in):
    """sqrt(6 / ((1 + a^2) * fan_in)) with a = sqrt(5), which reduces to sqrt(1 / fan_in)."""
    if fan_in < 1:
        raise ContractError(f"fan_in must be >= 1, got {fan_in}")
    return math.sqrt(6.0 / ((1.0 + 5.0) * fan_in))


def sample_kaiming_uniform(rng, fan_in, shape, dtype=None):
    bound = kaiming_uniform_bound(fan_in)
    dtype = dtype or default_dtype()
    return Tensor(rng.uniform(-bound, bound, shape).astype(dtype), dtype=dtype)


def sample_uniform_bias(rng, fan_in, shape, dtype=None):
    """Bias draws in +-1/sqrt(fan_in)."""
    return sample_kaiming_uniform(rng, fan_in, shape, dtype=dtype)


def zeros(shape, dtype=None):
    dtype = dtype or default_dtype()
    return Tensor(np.zeros(shape, dtype=dtype), dtype=dtype)


def ones(shape, dtype=None):
    dtype = dtype or default_dtype()
    return Tensor(np.ones(shape, dtype=dtype), dtype=dtype)


def full(shape, value, dtype=None):
    dtype = dtype or default_dtype()
    return Tensor(np.full(shape, value, dtype=dtype), dtype=dtype)
