"""Dense-tensor math with reverse-mode autodiff, seeded sampling and a gradient oracle."""
from peft_forge.autodiff.gradcheck import finite_diff_grad_check, grad_check, relative_error
from peft_forge.autodiff.init import (
    kaiming_uniform_bound,
    sample_kaiming_uniform,
    sample_truncated_normal,
    sample_uniform_bias,
)
from peft_forge.autodiff.ops import (
    concat,
    cross_entropy,
    gelu,
    layer_norm,
    linear,
    mask_multiply,
    matmul,
    softmax_lastdim,
)
from peft_forge.autodiff.parameter import Parameter
from peft_forge.autodiff.rng import Rng
from peft_forge.autodiff.tensor import (
    Tensor,
    default_dtype,
    is_grad_enabled,
    no_grad,
    precision,
    set_default_dtype,
    zero_grads,
)

__all__ = [
    "Parameter",
    "Rng",
    "Tensor",
    "concat",
    "cross_entropy",
    "default_dtype",
    "finite_diff_grad_check",
    "gelu",
    "grad_check",
    "is_grad_enabled",
    "kaiming_uniform_bound",
    "layer_norm",
    "linear",
    "mask_multiply",
    "matmul",
    "no_grad",
    "precision",
    "relative_error",
    "sample_kaiming_uniform",
    "sample_truncated_normal",
    "sample_uniform_bias",
    "set_default_dtype",
    "softmax_lastdim",
    "zero_grads",
]
