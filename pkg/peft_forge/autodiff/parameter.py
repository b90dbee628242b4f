"""Named, freezable parameters."""
from dataclasses import dataclass

from peft_forge.autodiff.tensor import Tensor


@dataclass(eq=False)
class Parameter:
    """A tensor registered under a hierarchical name.

    ``trainable`` is mirrored onto ``tensor.requires_grad``; the optimizer only
    ever touches parameters whose flag is set. ``no_decay`` marks layer-norm
    and learned-scale parameters, which skip weight decay by default.
    """

    name: str
    tensor: Tensor
    trainable: bool = True
    no_decay: bool = False

    def __post_init__(self):
        self.tensor.name = self.name
        self.tensor.requires_grad = self.trainable

    def set_trainable(self, flag):
        self.trainable = bool(flag)
        self.tensor.requires_grad = self.trainable
        if not self.trainable:
            self.tensor.grad = None

    @property
    def numel(self):
        return int(self.tensor.size)

    @property
    def shape(self):
        return self.tensor.shape
