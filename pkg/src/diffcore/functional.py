# -*- coding: utf-8 -*-
"""Composite operations built from the primitives in ``tensor``.

Gradients come for free from the primitives these are written in.
"""
import math

import numpy as np

from src.diffcore import tensor as T


def linear(x, weight, bias=None):
    """``x @ weight + bias`` with ``weight`` stored as [in, out]."""
    out = T.matmul(x, weight)
    if bias is not None:
        out = out + bias
    return out


def gru_cell(x, h, w_ih, w_hh, b_ih, b_hh):
    """One step of a gated recurrent unit.

    Gates are packed [reset | update | candidate] along the last axis of
    the weights, matching the usual GRU layout.
    """
    hidden = h.shape[-1]
    gi = linear(x, w_ih, b_ih)
    gh = linear(h, w_hh, b_hh)
    r_slice = (Ellipsis, slice(0, hidden))
    z_slice = (Ellipsis, slice(hidden, 2 * hidden))
    n_slice = (Ellipsis, slice(2 * hidden, 3 * hidden))
    r = T.sigmoid(gi[r_slice] + gh[r_slice])
    z = T.sigmoid(gi[z_slice] + gh[z_slice])
    n = T.tanh(gi[n_slice] + r * gh[n_slice])
    return (1.0 - z) * n + z * h


def split_heads(x, heads):
    """[B, L, D] -> [B, heads, L, D // heads]"""
    b, length, dim = x.shape
    return T.transpose(T.reshape(x, (b, length, heads, dim // heads)),
                       (0, 2, 1, 3))


def merge_heads(x):
    """[B, heads, L, d] -> [B, L, heads * d]"""
    b, heads, length, d = x.shape
    return T.reshape(T.transpose(x, (0, 2, 1, 3)), (b, length, heads * d))


def attention(q, k, v, mask=None, key_bias=None, value_bias=None,
              fallback=None):
    """Scaled dot-product attention over the last two axes.

    :q: [..., Lq, d] queries
    :k, v: [..., Lk, d] keys and values
    :mask: boolean [..., Lq, Lk], True where a query may attend
    :key_bias, value_bias: [..., Lq, Lk, d] per-pair additive terms on
        the keys and values (edge conditioning)
    :fallback: [..., Lq, d] output used for rows whose mask is all False
    :returns: [..., Lq, d]
    """
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = T.matmul(q, T.swapaxes(k, -1, -2))
    if key_bias is not None:
        scores = scores + T.sum_(T.expand_dims(q, -2) * key_bias, axis=-1)
    scores = scores * scale
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        fill = np.where(mask, 0.0, T.MASK_FILL).astype(q.dtype)
        scores = scores + fill
    weights = T.softmax(scores, axis=-1)
    out = T.matmul(weights, v)
    if value_bias is not None:
        out = out + T.sum_(T.expand_dims(weights, -1) * value_bias, axis=-2)
    if mask is not None and fallback is not None:
        has_keys = mask.any(axis=-1)
        if not has_keys.all():
            keep = has_keys[..., None].astype(q.dtype)
            out = out * keep + fallback * (1.0 - keep)
    return out


def sinusoidal_embedding(positions, dim, dtype=np.float64):
    """Fixed sin/cos features of integer positions, shape [len, dim]."""
    positions = np.atleast_1d(np.asarray(positions, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half, 1))
    angles = positions[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((len(positions), 1))], axis=-1)
    return emb.astype(dtype)
