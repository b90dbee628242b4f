"""Central finite-difference oracle for autodiff gradients."""
import logging

import numpy as np

from peft_forge.autodiff.tensor import no_grad
from peft_forge.errors import ContractError

logger = logging.getLogger(__name__)

H_RANGE = (1e-6, 1e-4)
# denominator floor: max(|analytic|, |numeric|, 1e-8)
DENOM_FLOOR = 1e-8


def relative_error(analytic, numeric):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOM_FLOOR)
    return np.abs(analytic - numeric) / denom


def _check_step(h, tensors):
    if not (H_RANGE[0] <= h <= H_RANGE[1]):
        raise ContractError(f"step h={h} outside {list(H_RANGE)}")
    for t in tensors:
        if t.dtype != np.float64:
            raise ContractError(f"gradient checks run in float64, {t!r} is {t.dtype}")


def finite_diff_grad_check(f, x, h=1e-6):
    """Max relative error between autodiff and central differences of ``f(x)``.

    ``f`` maps the tensor ``x`` to a scalar tensor. Every element of ``x`` is
    checked.
    """
    return grad_check(lambda: f(x), [x], h=h)


def grad_check(loss_fn, tensors, h=1e-6, max_coords=None, rng=None):
    """Finite-difference check of ``loss_fn()`` against several leaf tensors.

    With ``max_coords`` set, at most that many coordinates per tensor are
    checked, chosen with ``rng``; this keeps full-model checks affordable.
    """
    tensors = list(tensors)
    _check_step(h, tensors)
    flags = [t.requires_grad for t in tensors]
    for t in tensors:
        t.data = np.ascontiguousarray(t.data)
        t.requires_grad = True
        t.grad = None
    loss_fn().backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]
    for t, flag in zip(tensors, flags):
        t.requires_grad = flag
        t.grad = None

    worst = 0.0
    for t, grad in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.permutation(flat.size)[:max_coords]) if rng is not None else coords[:max_coords]
        for i in coords:
            original = flat[i]
            with no_grad():
                flat[i] = original + h
                plus = float(loss_fn().data)
                flat[i] = original - h
                minus = float(loss_fn().data)
            flat[i] = original
            numeric = (plus - minus) / (2.0 * h)
            err = float(relative_error(grad.reshape(-1)[i], numeric))
            if err > worst:
                worst = err
                logger.debug("grad check: %s[%d] analytic=%g numeric=%g", t.name, i, grad.reshape(-1)[i], numeric)
    return worst
