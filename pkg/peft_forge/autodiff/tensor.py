"""Dense tensors carrying a gradient slot, and the reverse-mode engine.

A Tensor wraps a numpy array. Operations that involve at least one tensor
with ``requires_grad`` record their parents and a backward closure; calling
``backward()`` on a scalar walks that graph in reverse topological order.
"""
from __future__ import annotations

import contextlib
import threading

import numpy as np

from peft_forge.errors import ContractError

_DTYPES = {"f32": np.float32, "f64": np.float64}
_default_dtype = np.float32

# graph recording is per thread: one computation graph never spans threads
_grad_mode = threading.local()


def set_default_dtype(dtype):
    """Select float32 or float64 for tensors created without an explicit dtype.

    Accepts a numpy dtype or one of the precision names ``"f32"`` / ``"f64"``.
    """
    global _default_dtype
    if isinstance(dtype, str):
        if dtype not in _DTYPES:
            raise ValueError(f"unknown precision {dtype!r}, expected one of {sorted(_DTYPES)}")
        dtype = _DTYPES[dtype]
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"only float32/float64 are supported, got {dtype}")
    _default_dtype = dtype


def default_dtype():
    return _default_dtype


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the default dtype."""
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def is_grad_enabled():
    return getattr(_grad_mode, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording in the current thread."""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype.kind == "f":
                dtype = data.dtype
            else:
                dtype = _default_dtype
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    # ---------------- introspection ----------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return self.data.item()

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={list(self.shape)}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def __len__(self):
        return self.data.shape[0]

    # ---------------- reverse mode ----------------
    def backward(self):
        """Accumulate d(self)/d(t) into ``t.grad`` for every participating t.

        Gradients accumulate across calls until they are reset with
        ``zero_grad`` / ``zero_grads``.
        """
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {list(self.shape)}")
        if not self.requires_grad:
            raise ContractError("backward() on a tensor that does not require grad")

        order = _topological_order(self)
        pending = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            g = np.asarray(g, dtype=node.data.dtype)
            node.grad = g.copy() if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, parent_grad in zip(node._parents, node._backward(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad

    # ---------------- operator sugar ----------------
    def __add__(self, other):
        from peft_forge.autodiff import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from peft_forge.autodiff import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from peft_forge.autodiff import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from peft_forge.autodiff import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from peft_forge.autodiff import ops
        return ops.div(self, other)

    def __neg__(self):
        from peft_forge.autodiff import ops
        return ops.neg(self)

    def __pow__(self, exponent):
        from peft_forge.autodiff import ops
        return ops.power(self, exponent)

    def __matmul__(self, other):
        from peft_forge.autodiff import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from peft_forge.autodiff import ops
        return ops.index(self, index)

    def sum(self, axis=None, keepdims=False):
        from peft_forge.autodiff import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from peft_forge.autodiff import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from peft_forge.autodiff import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def swapaxes(self, axis1, axis2):
        from peft_forge.autodiff import ops
        return ops.swapaxes(self, axis1, axis2)


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def record(data, parents, backward):
    """Wrap an op result, wiring it into the graph when any parent needs grad."""
    out = Tensor(data, dtype=data.dtype if isinstance(data, np.ndarray) else None)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def as_tensor(value, like=None):
    """Coerce scalars/arrays to a constant Tensor, matching ``like``'s dtype."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value), dtype=dtype)


def zero_grads(tensors):
    for t in tensors:
        t.grad = None
