# -*- coding: utf-8 -*-
"""Noise schedule, forward corruption, reverse steps and the denoiser.

Trajectory tensors are laid out [N_a, T_f, 2, K]. The step index tau
runs 0..T with tau=0 the clean data; tables are stored with a leading
tau=0 entry (beta=0, alpha_bar=1).

The arithmetic helpers accept numpy arrays or DiffArrays, so the same
code samples at inference and carries gradients during training.
"""
import math
import threading
from dataclasses import dataclass

import numpy as np

from src.diffcore import tensor as T
from src.diffcore.functional import sinusoidal_embedding
from src.diffcore.layers import (MLP, FeedForward, Layer, LayerNorm, Linear,
                                 MultiHeadAttention, uniform_init)
from src.exceptions import InferenceError

SAMPLERS = ('ddpm', 'ddim')


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray


@dataclass
class NoisyTrajectory:
    values: np.ndarray
    tau: object


def make_schedule(T, beta_start=1e-4, beta_end=0.02) -> NoiseSchedule:
    """Linear beta schedule with precomputed alpha and alpha_bar tables."""
    if T < 1:
        raise ValueError(f'diffusion needs at least one step, got T={T}')
    beta = np.concatenate([[0.0], np.linspace(beta_start, beta_end, T)])
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    for table in (beta, alpha, alpha_bar):
        table.setflags(write=False)
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def _check_tau(tau, schedule, lowest=1):
    t = np.asarray(tau)
    if np.any(t < lowest) or np.any(t > schedule.T):
        raise ValueError(
            f'tau must lie in [{lowest}, {schedule.T}], got {tau}')
    return t


def _coef(table, tau, like_ndim):
    """Table lookup shaped to broadcast over a trajectory tensor."""
    t = np.asarray(tau)
    if t.ndim == 0:
        return float(table[int(t)])
    return table[t].reshape((-1,) + (1,) * (like_ndim - 1))


def _sqrt(c):
    return math.sqrt(c) if isinstance(c, float) else np.sqrt(c)


def forward_sample(a0, tau, noise, schedule) -> NoisyTrajectory:
    """sqrt(alpha_bar) a0 + sqrt(1 - alpha_bar) noise.

    ``tau`` is a scalar or one step per agent (leading axis).
    """
    _check_tau(tau, schedule)
    a0 = np.asarray(a0)
    ab = _coef(schedule.alpha_bar, tau, a0.ndim)
    values = _sqrt(ab) * a0 + _sqrt(1.0 - ab) * np.asarray(noise)
    return NoisyTrajectory(values=values, tau=tau)


def predict_a0(a_tau, tau, eps_hat, schedule):
    """Clean-trajectory estimate implied by a noise prediction."""
    _check_tau(tau, schedule)
    ab = _coef(schedule.alpha_bar, tau, len(a_tau.shape))
    return (a_tau - _sqrt(1.0 - ab) * eps_hat) * (1.0 / _sqrt(ab))


def posterior_mean(a_tau, tau, eps_hat, schedule):
    """1/sqrt(alpha) (A_tau - beta / sqrt(1 - alpha_bar) eps_hat)"""
    _check_tau(tau, schedule)
    ndim = len(a_tau.shape)
    alpha = _coef(schedule.alpha, tau, ndim)
    beta = _coef(schedule.beta, tau, ndim)
    ab = _coef(schedule.alpha_bar, tau, ndim)
    return (a_tau - (beta / _sqrt(1.0 - ab)) * eps_hat) * (1.0 / _sqrt(alpha))


def sample_step(a_tau, tau, eps_hat, schedule, method='ddpm', rng=None,
                tau_next=None):
    """One reverse step from ``tau``.

    ddpm: posterior mean plus sqrt(beta) z, with no noise at tau=1.
    ddim (eta=0): deterministic jump to ``tau_next`` (default tau-1)
    through the implied clean estimate.
    """
    if method not in SAMPLERS:
        raise InferenceError(f'unknown sampler {method!r}')
    _check_tau(tau, schedule)
    ndim = len(a_tau.shape)
    if method == 'ddpm':
        mean = posterior_mean(a_tau, tau, eps_hat, schedule)
        t = np.asarray(tau)
        if np.all(t <= 1):
            return mean
        if rng is None:
            raise ValueError('ddpm sampling needs an rng')
        sigma = _sqrt(_coef(schedule.beta, tau, ndim))
        if t.ndim:
            sigma = sigma * (t > 1).reshape(np.shape(sigma))
        return mean + sigma * rng.standard_normal(a_tau.shape)
    if tau_next is None:
        tau_next = np.asarray(tau) - 1
    if np.array_equal(np.asarray(tau_next), np.asarray(tau)):
        return a_tau
    _check_tau(tau_next, schedule, lowest=0)
    ab_next = _coef(schedule.alpha_bar, tau_next, ndim)
    a0_hat = predict_a0(a_tau, tau, eps_hat, schedule)
    return a0_hat * _sqrt(ab_next) + eps_hat * _sqrt(1.0 - ab_next)


def ddim_timesteps(T, steps):
    """``steps`` descending labels evenly spaced over T..1."""
    if steps < 1 or steps > T:
        raise InferenceError(f'ddim steps must lie in [1, {T}], got {steps}')
    if steps == 1:
        return np.array([T])
    return np.round(np.linspace(T, 1, steps)).astype(int)


def run_reverse(eps_fn, a_start, labels, schedule, method, rng=None):
    """Apply ``len(labels)`` reverse steps starting at ``labels[0]``.

    :eps_fn: callable (a, tau) -> noise prediction
    :labels: descending step indices; ddpm requires consecutive labels,
        ddim jumps from each label to the next and finally to 0
    """
    a = a_start
    labels = [int(t) for t in labels]
    for i, tau in enumerate(labels):
        eps = eps_fn(a, tau)
        if method == 'ddim':
            target = labels[i + 1] if i + 1 < len(labels) else 0
            a = sample_step(a, tau, eps, schedule, 'ddim', tau_next=target)
        else:
            a = sample_step(a, tau, eps, schedule, method, rng)
    return a


class DenoiserBlock(Layer):
    def __init__(self, store, name, dim, heads, rng):
        super().__init__(store, name)
        self.self_attn = MultiHeadAttention(store, f'{name}.self_attn', dim,
                                            heads, rng)
        self.norm1 = LayerNorm(store, f'{name}.norm1', dim)
        self.cross_attn = MultiHeadAttention(store, f'{name}.cross_attn',
                                             dim, heads, rng)
        self.norm2 = LayerNorm(store, f'{name}.norm2', dim)
        self.ffn = FeedForward(store, f'{name}.ffn', dim, rng)
        self.norm3 = LayerNorm(store, f'{name}.norm3', dim)

    def forward(self, x, context):
        x = self.norm1(x + self.self_attn(x, x))
        x = self.norm2(x + self.cross_attn(x, context))
        return self.norm3(x + self.ffn(x))


class Denoiser(Layer):
    """Transformer noise predictor over the T_f time tokens of each mode.

    Modes are denoised independently; the conditioning token and the
    step embedding form a two-token context for cross-attention.
    """

    def __init__(self, store, name, config, future_steps, rng):
        super().__init__(store, name)
        d = config.hidden
        self.hidden = d
        self.future_steps = future_steps
        self.in_proj = Linear(store, f'{name}.in_proj', 2, d, rng)
        self.position = self.param(
            'position', uniform_init(rng, d, (future_steps, d)))
        self.time_mlp = MLP(store, f'{name}.time_mlp', [d, d, d], rng,
                            norm=False)
        self.blocks = [DenoiserBlock(store, f'{name}.block{i}', d,
                                     config.heads, rng)
                       for i in range(config.denoiser_blocks)]
        self.out_proj = Linear(store, f'{name}.out_proj', d, 2, rng)
        self.calls = 0
        self._lock = threading.Lock()

    def reset_calls(self):
        with self._lock:
            self.calls = 0

    def forward(self, a_tau, tau, cond):
        """
        :a_tau: [N, T_f, 2, K] noisy trajectories
        :tau: int, or one step per agent
        :cond: [N, D] conditioning tokens
        :returns: noise prediction, same shape as ``a_tau``
        """
        with self._lock:
            self.calls += 1
        x = a_tau if isinstance(a_tau, T.DiffArray) else \
            T.DiffArray(a_tau, dtype=self.store.dtype)
        n, steps, _, k = x.shape
        d = self.hidden
        x = T.reshape(T.transpose(x, (0, 3, 1, 2)), (n * k, steps, 2))
        h = self.in_proj(x) + self.position

        taus = np.broadcast_to(np.asarray(tau), (n,))
        temb = self.time_mlp(T.DiffArray(
            sinusoidal_embedding(taus, d), dtype=self.store.dtype))
        temb = T.reshape(T.broadcast_to(T.reshape(temb, (n, 1, d)),
                                        (n, k, d)), (n * k, 1, d))
        cond = T.reshape(T.broadcast_to(T.reshape(cond, (n, 1, d)),
                                        (n, k, d)), (n * k, 1, d))
        h = h + temb
        context = T.concat([cond, temb], axis=1)
        for block in self.blocks:
            h = block(h, context)
        out = self.out_proj(h)
        return T.transpose(T.reshape(out, (n, k, steps, 2)), (0, 2, 3, 1))
