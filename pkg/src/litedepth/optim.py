"""Decoupled weight-decay Adam and the cosine learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .nn import Module, Parameter
from .tensor import ArgumentError, ContractError


class AdamW:
    """AdamW over named parameters; decay skips parameters flagged
    ``no_decay`` (normalization gains/biases, branch weights, gates, masks)."""

    def __init__(self, named_params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.01):
        self.params = list(named_params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    @classmethod
    def for_model(cls, model: Module, **kw) -> "AdamW":
        return cls(model.named_parameters(), **kw)

    def step(self, lr: float | None = None):
        if lr is not None:
            self.lr = lr
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params:
            if p.grad is None:
                raise ContractError(f"parameter {name!r} has no gradient")
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            if self.weight_decay and not getattr(p, "no_decay", False):
                p.data -= self.lr * self.weight_decay * p.data
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self):
        for _, p in self.params:
            p.zero_grad()


def adamw_step(optimizer: AdamW, lr: float | None = None):
    """Single update using gradients already populated on the parameters."""
    optimizer.step(lr)


def cosine_lr(step: int, total: int, base: float) -> float:
    """base * (1 + cos(pi * step / total)) / 2; anneals from base to 0."""
    if step < 0 or step > total:
        raise ArgumentError(f"step {step} outside [0, {total}]")
    return base * (1.0 + np.cos(np.pi * step / total)) / 2.0
