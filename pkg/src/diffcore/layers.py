# -*- coding: utf-8 -*-
"""Parameterized building blocks registered in a ParamStore.

Each layer owns a dotted name prefix; its parameters live in the store
under ``<prefix>.<key>`` so that freezing and checkpointing work on
name prefixes.
"""
import math

import numpy as np

from src.diffcore import functional as F
from src.diffcore import tensor as T


def uniform_init(rng, fan_in, shape):
    """Fan-in scaled uniform initialization, U(-1/sqrt(fan_in), +)."""
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    def __init__(self, store, name):
        self.store = store
        self.name = name

    def param(self, key, values):
        return self.store.add(f'{self.name}.{key}', values)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Layer):
    def __init__(self, store, name, in_dim, out_dim, rng, bias=True):
        super().__init__(store, name)
        self.in_dim, self.out_dim = in_dim, out_dim
        self.weight = self.param(
            'weight', uniform_init(rng, in_dim, (in_dim, out_dim)))
        self.bias = self.param(
            'bias', uniform_init(rng, in_dim, (out_dim,))) if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Layer):
    def __init__(self, store, name, dim, eps=1e-5):
        super().__init__(store, name)
        self.eps = eps
        self.gain = self.param('gain', np.ones(dim))
        self.shift = self.param('shift', np.zeros(dim))

    def forward(self, x):
        return T.layer_norm(x, self.eps) * self.gain + self.shift


class MLP(Layer):
    """Stack of (linear -> layer norm -> ReLU) blocks and a final linear."""

    def __init__(self, store, name, dims, rng, norm=True):
        super().__init__(store, name)
        self.hidden = []
        for i, (d_in, d_out) in enumerate(zip(dims[:-2], dims[1:-1])):
            lin = Linear(store, f'{name}.fc{i}', d_in, d_out, rng)
            ln = LayerNorm(store, f'{name}.ln{i}', d_out) if norm else None
            self.hidden.append((lin, ln))
        self.out = Linear(store, f'{name}.out', dims[-2], dims[-1], rng)

    def forward(self, x):
        for lin, ln in self.hidden:
            x = lin(x)
            if ln is not None:
                x = ln(x)
            x = T.relu(x)
        return self.out(x)


class GRU(Layer):
    """Multi-layer GRU over [B, L, in] returning the last hidden state."""

    def __init__(self, store, name, in_dim, hidden, layers, rng):
        super().__init__(store, name)
        self.hidden = hidden
        self.cells = []
        for i in range(layers):
            d_in = in_dim if i == 0 else hidden
            self.cells.append((
                self.param(f'l{i}.w_ih',
                           uniform_init(rng, hidden, (d_in, 3 * hidden))),
                self.param(f'l{i}.w_hh',
                           uniform_init(rng, hidden, (hidden, 3 * hidden))),
                self.param(f'l{i}.b_ih',
                           uniform_init(rng, hidden, (3 * hidden,))),
                self.param(f'l{i}.b_hh',
                           uniform_init(rng, hidden, (3 * hidden,))),
            ))

    def forward(self, x):
        batch, steps = x.shape[0], x.shape[1]
        seq = [x[:, t, :] for t in range(steps)]
        for w_ih, w_hh, b_ih, b_hh in self.cells:
            h = T.DiffArray(np.zeros((batch, self.hidden), dtype=x.dtype))
            outputs = []
            for x_t in seq:
                h = F.gru_cell(x_t, h, w_ih, w_hh, b_ih, b_hh)
                outputs.append(h)
            seq = outputs
        return seq[-1]


class MultiHeadAttention(Layer):
    """Multi-head attention with optional masks and per-pair biases.

    Rows whose mask is entirely False attend to themselves: their output
    is the value projection of the query token.
    """

    def __init__(self, store, name, dim, heads, rng):
        super().__init__(store, name)
        if dim % heads:
            raise ValueError(f'width {dim} not divisible by {heads} heads')
        self.dim, self.heads = dim, heads
        self.q = Linear(store, f'{name}.q', dim, dim, rng)
        self.k = Linear(store, f'{name}.k', dim, dim, rng)
        self.v = Linear(store, f'{name}.v', dim, dim, rng)
        self.o = Linear(store, f'{name}.o', dim, dim, rng)

    def _pair_heads(self, bias):
        # [B, Lq, Lk, D] -> [B, heads, Lq, Lk, d]
        b, lq, lk, _ = bias.shape
        bias = T.reshape(bias, (b, lq, lk, self.heads, self.dim // self.heads))
        return T.transpose(bias, (0, 3, 1, 2, 4))

    def forward(self, query, context, mask=None, key_bias=None,
                value_bias=None):
        """
        :query: [B, Lq, D]
        :context: [B, Lk, D]
        :mask: boolean [B, Lq, Lk], True where attention is allowed
        :key_bias, value_bias: [B, Lq, Lk, D]
        """
        q = F.split_heads(self.q(query), self.heads)
        k = F.split_heads(self.k(context), self.heads)
        v = F.split_heads(self.v(context), self.heads)
        fallback = None
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)[:, None, :, :]
            if not mask.any(axis=-1).all():
                fallback = F.split_heads(self.v(query), self.heads)
        if key_bias is not None:
            key_bias = self._pair_heads(key_bias)
        if value_bias is not None:
            value_bias = self._pair_heads(value_bias)
        out = F.attention(q, k, v, mask=mask, key_bias=key_bias,
                          value_bias=value_bias, fallback=fallback)
        return self.o(F.merge_heads(out))


class FeedForward(Layer):
    def __init__(self, store, name, dim, rng, expansion=2):
        super().__init__(store, name)
        self.fc1 = Linear(store, f'{name}.fc1', dim, expansion * dim, rng)
        self.fc2 = Linear(store, f'{name}.fc2', expansion * dim, dim, rng)

    def forward(self, x):
        return self.fc2(T.relu(self.fc1(x)))
