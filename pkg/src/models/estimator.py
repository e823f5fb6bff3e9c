# -*- coding: utf-8 -*-
"""Motion pattern estimator and mode heads.

The estimator replaces the first T - gamma reverse steps: it predicts a
per-agent mean trajectory, an isotropic spread and K unit node
trajectories, then forms the prior A_gamma = mean + sigma * nodes.
All trajectories here live in the scaled local frame used for diffusion.
"""
from dataclasses import dataclass

from src.diffcore import tensor as T
from src.diffcore.layers import MLP, Layer, LayerNorm, Linear
from src.exceptions import ShapeError


@dataclass
class MotionPattern:
    """mean [N, T_f, 2], variance [N, 1] (> 0), nodes [N, T_f, 2, K]"""
    mean: T.DiffArray
    variance: T.DiffArray
    nodes: T.DiffArray


@dataclass
class ModeHeads:
    logits: T.DiffArray
    probabilities: T.DiffArray
    laplace_scale: T.DiffArray


def _joint(d_local, d_global):
    if d_local.shape != d_global.shape:
        raise ShapeError(f'local {d_local.shape} and global '
                         f'{d_global.shape} embeddings differ')
    return T.concat([d_local, d_global], axis=-1)


class EncoderBlock(Layer):
    """g_enc: linear -> layer norm -> ReLU."""

    def __init__(self, store, name, in_dim, out_dim, rng):
        super().__init__(store, name)
        self.fc = Linear(store, f'{name}.fc', in_dim, out_dim, rng)
        self.norm = LayerNorm(store, f'{name}.norm', out_dim)

    def forward(self, x):
        return T.relu(self.norm(self.fc(x)))


class MotionPatternEstimator(Layer):
    def __init__(self, store, name, config, future_steps, rng):
        super().__init__(store, name)
        d, width = config.hidden, config.estimator_width
        hidden = config.decoder_hidden
        self.future_steps = future_steps
        self.modes = config.modes
        self.mean_agg = Linear(store, f'{name}.mean_agg', 2 * d, width, rng)
        self.mean_enc = EncoderBlock(store, f'{name}.mean_enc', width, width,
                                     rng)
        self.mean_dec = MLP(store, f'{name}.mean_dec',
                            [width, hidden, future_steps * 2], rng)
        self.var_agg = Linear(store, f'{name}.var_agg', 2 * d, width, rng)
        self.var_enc = EncoderBlock(store, f'{name}.var_enc', width, width,
                                    rng)
        self.var_out = Linear(store, f'{name}.var_out', width, 1, rng)
        self.node_agg = Linear(store, f'{name}.node_agg', 2 * d, width, rng)
        self.node_dec = MLP(store, f'{name}.node_dec',
                            [width + 1, hidden,
                             future_steps * 2 * config.modes], rng)

    def estimate_mean(self, d_local, d_global):
        """[N, T_f, 2] mean trajectory."""
        x = self.mean_enc(self.mean_agg(_joint(d_local, d_global)))
        return T.reshape(self.mean_dec(x), (-1, self.future_steps, 2))

    def estimate_variance(self, d_local, d_global):
        """[N, 1] spread, positive through softplus."""
        x = self.var_enc(self.var_agg(_joint(d_local, d_global)))
        return T.softplus(self.var_out(x))

    def estimate_nodes(self, d_local, d_global, variance):
        """[N, T_f, 2, K] unit node trajectories, conditioned on sigma."""
        x = self.node_agg(_joint(d_local, d_global))
        nodes = self.node_dec(T.concat([x, variance], axis=-1))
        return T.reshape(nodes, (-1, self.future_steps, 2, self.modes))

    def forward(self, d_local, d_global) -> MotionPattern:
        variance = self.estimate_variance(d_local, d_global)
        return MotionPattern(
            mean=self.estimate_mean(d_local, d_global),
            variance=variance,
            nodes=self.estimate_nodes(d_local, d_global, variance))

    def prior(self, d_local, d_global):
        return reparameterize(self.forward(d_local, d_global))


def reparameterize(pattern: MotionPattern):
    """A_gamma[n, t, c, k] = mean[n, t, c] + sigma[n] * nodes[n, t, c, k]"""
    mean, variance, nodes = pattern.mean, pattern.variance, pattern.nodes
    n = nodes.shape[0]
    if mean.shape != nodes.shape[:3] or variance.shape != (n, 1):
        raise ShapeError(
            f'reparameterize: mean {mean.shape}, variance {variance.shape} '
            f'and nodes {nodes.shape} do not agree')
    return T.reshape(mean, mean.shape + (1,)) \
        + T.reshape(variance, (n, 1, 1, 1)) * nodes


class MLPPrior(Layer):
    """Plain MLP decoder straight to K trajectories; ablation baseline."""

    def __init__(self, store, name, config, future_steps, rng):
        super().__init__(store, name)
        d = config.hidden
        self.future_steps = future_steps
        self.modes = config.modes
        self.decoder = MLP(store, f'{name}.decoder',
                           [2 * d, config.mlp_prior_hidden,
                            future_steps * 2 * config.modes], rng)

    def prior(self, d_local, d_global):
        out = self.decoder(_joint(d_local, d_global))
        return T.reshape(out, (-1, self.future_steps, 2, self.modes))


class ModeHeadPredictor(Layer):
    """Mode probabilities and Laplace scales from [D_L | g_proj(D_G)]."""

    def __init__(self, store, name, config, future_steps, rng):
        super().__init__(store, name)
        d = config.hidden
        self.future_steps = future_steps
        self.proj = Linear(store, f'{name}.proj', d, d, rng)
        self.prob = MLP(store, f'{name}.prob', [2 * d, d, config.modes], rng)
        self.laplace = MLP(store, f'{name}.laplace',
                           [2 * d, d, future_steps * 2], rng)

    def forward(self, d_local, d_global) -> ModeHeads:
        x = _joint(d_local, self.proj(d_global))
        logits = self.prob(x)
        scale = T.softplus(self.laplace(x))
        return ModeHeads(
            logits=logits,
            probabilities=T.softmax(logits, axis=-1),
            laplace_scale=T.reshape(scale, (-1, self.future_steps, 2)))
