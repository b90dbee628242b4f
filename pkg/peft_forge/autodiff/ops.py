"""Differentiable primitives over Tensor.

Every function returns a new Tensor; when any input requires grad the
result carries a closure mapping the upstream gradient to one gradient per
parent. Broadcasting follows numpy and gradients are summed back to the
operand shapes.
"""
import numpy as np
from scipy.special import erf

from peft_forge.autodiff.tensor import Tensor, as_tensor, record
from peft_forge.errors import DimensionError, LabelIndexError

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(grad, shape):
    """Sum ``grad`` over the axes numpy broadcast to reach it from ``shape``."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _pair(a, b):
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


# ---------------- elementwise arithmetic ----------------
def add(a, b):
    a, b = _pair(a, b)
    out = a.data + b.data
    return record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = _pair(a, b)
    out = a.data - b.data
    return record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = _pair(a, b)
    out = a.data * b.data
    return record(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def mask_multiply(a, mask):
    """``a * mask`` for a constant numpy mask broadcastable to ``a``."""
    mask = np.asarray(mask, dtype=a.dtype)
    return record(a.data * mask, (a,), lambda g: (_unbroadcast(g * mask, a.shape),))


def div(a, b):
    a, b = _pair(a, b)
    out = a.data / b.data

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return record(out, (a, b), backward)


def neg(a):
    return record(-a.data, (a,), lambda g: (-g,))


def power(a, exponent):
    exponent = float(exponent)
    out = a.data ** exponent
    return record(out, (a,), lambda g: (g * exponent * a.data ** (exponent - 1.0),))


def exp(a):
    out = np.exp(a.data)
    return record(out, (a,), lambda g: (g * out,))


def log(a):
    return record(np.log(a.data), (a,), lambda g: (g / a.data,))


# ---------------- reductions and shape ----------------
def sum(a, axis=None, keepdims=False):
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return record(np.asarray(out, dtype=a.dtype), (a,), backward)


def mean(a, axis=None, keepdims=False):
    count = a.size if axis is None else int(np.prod([a.shape[ax] for ax in np.atleast_1d(axis)]))
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a, shape):
    out = a.data.reshape(shape)
    return record(out, (a,), lambda g: (g.reshape(a.shape),))


def swapaxes(a, axis1, axis2):
    out = np.swapaxes(a.data, axis1, axis2)
    return record(out, (a,), lambda g: (np.swapaxes(g, axis1, axis2),))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        return tuple(
            np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:])
        )

    return record(out, tuple(tensors), backward)


def index(a, key):
    out = a.data[key]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)

    return record(np.array(out, dtype=a.dtype), (a,), backward)


# ---------------- linear algebra ----------------
def matmul(a, b):
    """Batched matrix product ``a[..., p, q] @ b[..., q, r]``."""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul", a.shape, b.shape)
    out = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return record(out, (a, b), backward)


def linear(x, weight, bias=None):
    """``x @ weight + bias`` with weight laid out as [in, out]."""
    y = matmul(x, weight)
    return y if bias is None else add(y, bias)


# ---------------- activations and normalizations ----------------
def gelu(x):
    """Exact Gaussian error linear unit ``x * Phi(x)``."""
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    out = x.data * cdf

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return record(out.astype(x.dtype, copy=False), (x,), backward)


def softmax_lastdim(x):
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return record(y, (x,), backward)


def layer_norm(x, gamma, beta, eps=1e-6):
    """Normalize over the last axis with population variance, then ``gamma * x_hat + beta``."""
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std
    out = x_hat * gamma.data + beta.data

    def backward(g):
        d_hat = g * gamma.data
        dx = inv_std * (
            d_hat
            - d_hat.mean(axis=-1, keepdims=True)
            - x_hat * (d_hat * x_hat).mean(axis=-1, keepdims=True)
        )
        lead = tuple(range(g.ndim - 1))
        return dx, (g * x_hat).sum(axis=lead), g.sum(axis=lead)

    return record(out.astype(x.dtype, copy=False), (x, gamma, beta), backward)


def cross_entropy(logits, labels):
    """Mean negative log-softmax of the true class over a [b, c] batch."""
    labels = np.asarray(labels, dtype=np.int64)
    batch, classes = logits.shape
    if labels.shape != (batch,):
        raise DimensionError("cross_entropy", logits.shape, labels.shape)
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise LabelIndexError(f"labels must lie in [0, {classes}), got {labels.min()}..{labels.max()}")
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_z
    rows = np.arange(batch)
    loss = -log_probs[rows, labels].mean()

    def backward(g):
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1.0
        return (grad * (g / batch),)

    return record(np.asarray(loss, dtype=logits.dtype), (logits,), backward)
