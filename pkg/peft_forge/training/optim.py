"""AdamW with decoupled weight decay."""
from dataclasses import dataclass, field

import numpy as np

from peft_forge.errors import ContractError


@dataclass
class OptimizerState:
    """First and second moments per trainable parameter name, and the step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def create(cls, params):
        state = cls()
        for p in params:
            if p.trainable:
                state._ensure(p)
        return state

    def _ensure(self, param):
        if param.name not in self.m:
            self.m[param.name] = np.zeros_like(param.tensor.data)
            self.v[param.name] = np.zeros_like(param.tensor.data)


def adamw_step(params, grads, state, lr, cfg):
    """One AdamW update of every trainable parameter in ``params``, in place.

    ``grads`` maps parameter names to gradient arrays; None reads each
    parameter's accumulated ``tensor.grad``. Frozen parameters are skipped.
    """
    state.step += 1
    t = state.step
    b1, b2 = cfg.beta1, cfg.beta2
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t
    for p in params:
        if not p.trainable:
            continue
        g = p.tensor.grad if grads is None else grads.get(p.name)
        if g is None:
            raise ContractError(f"trainable parameter {p.name} has no gradient")
        state._ensure(p)
        m = state.m[p.name]
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        decay = 0.0 if (p.no_decay and not cfg.decay_norm_and_scale) else cfg.weight_decay
        theta = p.tensor.data
        update = m_hat / (np.sqrt(v_hat) + cfg.eps) + decay * theta
        theta -= lr * update
    return state
