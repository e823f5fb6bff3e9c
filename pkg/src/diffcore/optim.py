# -*- coding: utf-8 -*-
"""AdamW with decoupled weight decay, plus global-norm clipping."""
import math

import numpy as np

from src.exceptions import NonFiniteError


def adamw_step(store, lr, weight_decay=0.0, betas=(0.9, 0.999), eps=1e-8):
    """Update every trainable parameter in ``store`` from its gradient."""
    beta1, beta2 = betas
    for name, param in store.items():
        if not param.requires_grad:
            continue
        grad = param.grad
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f'adamw: non-finite gradient for {name!r}')
        state = store.optimizer_state(name)
        state.step += 1
        if weight_decay:
            param.values *= (1.0 - lr * weight_decay)
        state.m = beta1 * state.m + (1.0 - beta1) * grad
        state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
        m_hat = state.m / (1.0 - beta1 ** state.step)
        v_hat = state.v / (1.0 - beta2 ** state.step)
        param.values -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(
            param.dtype)


def clip_grad_norm(store, max_norm) -> float:
    """Rescale trainable gradients so their global L2 norm <= max_norm.

    :returns: the norm before clipping
    """
    params = [p for _, p in store.items() if p.requires_grad]
    total = math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params))
    if max_norm is not None and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad = p.grad * scale
    return total


class AdamW:
    """AdamW bound to a store, with an optional cosine learning-rate decay."""

    def __init__(self, store, lr, weight_decay=0.01, betas=(0.9, 0.999),
                 eps=1e-8, schedule='constant', total_steps=None):
        if schedule not in ('constant', 'cosine'):
            raise ValueError(f'unknown learning-rate schedule {schedule!r}')
        self.store = store
        self.base_lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.schedule = schedule
        self.total_steps = total_steps
        self.steps_taken = 0

    @property
    def lr(self):
        if self.schedule == 'constant' or not self.total_steps:
            return self.base_lr
        progress = min(self.steps_taken / self.total_steps, 1.0)
        return 0.5 * self.base_lr * (1.0 + math.cos(math.pi * progress))

    def step(self):
        adamw_step(self.store, self.lr, self.weight_decay, self.betas,
                   self.eps)
        self.steps_taken += 1
