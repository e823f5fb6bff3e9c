# -*- coding: utf-8 -*-
"""Scenario encoder producing local and global agent embeddings.

Local: per-timestep cross-attention from each agent to its neighbors
and then to nearby lane segments, followed by a multi-layer GRU over the
history. Global: attention across all agents with relative poses
injected as additive key/value biases.
"""
from dataclasses import dataclass

import numpy as np

from src.diffcore import tensor as T
from src.diffcore.layers import (MLP, FeedForward, Layer, LayerNorm, Linear,
                                 MultiHeadAttention, GRU)
from src.exceptions import ShapeError
from src.features.build_features import (AGENT_STEP_DIM, LANE_DIM,
                                         NEIGHBOR_DIM, PAIR_DIM)


@dataclass
class Embeddings:
    """Row i belongs to agent i in scenario order; both [N, D]."""
    d_local: T.DiffArray
    d_global: T.DiffArray


class CrossAttentionBlock(Layer):
    """Post-norm attention + feed-forward block."""

    def __init__(self, store, name, dim, heads, rng):
        super().__init__(store, name)
        self.attn = MultiHeadAttention(store, f'{name}.attn', dim, heads, rng)
        self.norm1 = LayerNorm(store, f'{name}.norm1', dim)
        self.ffn = FeedForward(store, f'{name}.ffn', dim, rng)
        self.norm2 = LayerNorm(store, f'{name}.norm2', dim)

    def forward(self, x, context, mask=None, key_bias=None, value_bias=None):
        x = self.norm1(x + self.attn(x, context, mask, key_bias, value_bias))
        return self.norm2(x + self.ffn(x))


class GlobalBlock(Layer):
    def __init__(self, store, name, dim, heads, rng):
        super().__init__(store, name)
        self.block = CrossAttentionBlock(store, f'{name}.block', dim, heads,
                                         rng)
        self.key_bias = Linear(store, f'{name}.key_bias', dim, dim, rng)
        self.value_bias = Linear(store, f'{name}.value_bias', dim, dim, rng)

    def forward(self, x, edges):
        return self.block(x, x, None, self.key_bias(edges),
                          self.value_bias(edges))


class ScenarioEncoder(Layer):
    def __init__(self, store, name, config, rng):
        super().__init__(store, name)
        d, heads = config.hidden, config.heads
        self.hidden = d
        self.agent_embed = MLP(store, f'{name}.agent_embed',
                               [AGENT_STEP_DIM, d, d], rng)
        self.neighbor_embed = MLP(store, f'{name}.neighbor_embed',
                                  [NEIGHBOR_DIM, d, d], rng)
        self.lane_embed = MLP(store, f'{name}.lane_embed',
                              [LANE_DIM, d, d], rng)
        self.pair_embed = MLP(store, f'{name}.pair_embed',
                              [PAIR_DIM, d, d], rng)
        self.agent_agent = [
            CrossAttentionBlock(store, f'{name}.agent_agent{i}', d, heads, rng)
            for i in range(config.interaction_layers)]
        self.temporal = GRU(store, f'{name}.temporal', d, d,
                            config.temporal_layers, rng)
        self.agent_lane = [
            CrossAttentionBlock(store, f'{name}.agent_lane{i}', d, heads, rng)
            for i in range(config.interaction_layers)]
        self.global_layers = [
            GlobalBlock(store, f'{name}.global{i}', d, heads, rng)
            for i in range(config.global_layers)]
        self.aggregate = Linear(store, f'{name}.aggregate', 2 * d, d, rng)

    def _const(self, values):
        return T.DiffArray(values, dtype=self.store.dtype)

    def encode_local(self, features):
        """[N, D] local embeddings from histories, neighbors and lanes."""
        n, steps = features.agent_steps.shape[:2]
        d = self.hidden
        own = self.agent_embed(self._const(features.agent_steps))
        query = T.reshape(own, (n * steps, 1, d))
        others = self.neighbor_embed(self._const(features.neighbor_tokens))
        others = T.reshape(T.transpose(others, (0, 2, 1, 3)),
                           (n * steps, n, d))
        mask = np.repeat(features.neighbor_mask[:, None, :], steps, axis=0)
        for block in self.agent_agent:
            query = block(query, others, mask)

        # lane tokens live in the agent frame, shared by every step
        lanes = self.lane_embed(self._const(features.lane_tokens))
        segments = lanes.shape[1]
        lanes = T.broadcast_to(T.expand_dims(lanes, 1),
                               (n, steps, segments, d))
        lanes = T.reshape(lanes, (n * steps, segments, d))
        lane_mask = np.repeat(features.lane_mask[:, None, :], steps, axis=0)
        for block in self.agent_lane:
            query = block(query, lanes, lane_mask)
        return self.temporal(T.reshape(query, (n, steps, d)))

    def encode_global(self, d_local, features):
        """[N, D] embeddings after attention across every agent."""
        n, d = d_local.shape
        edges = self.pair_embed(self._const(features.pair_pose))
        edges = T.reshape(edges, (1, n, n, d))
        x = T.reshape(d_local, (1, n, d))
        for block in self.global_layers:
            x = block(x, edges)
        return T.reshape(x, (n, d))

    def aggregate_embedding(self, d_local, d_global):
        """phi_agg: one linear layer over [D_L | D_G]."""
        if d_local.shape != d_global.shape:
            raise ShapeError(
                f'aggregate: local {d_local.shape} and global '
                f'{d_global.shape} embeddings differ')
        return self.aggregate(T.concat([d_local, d_global], axis=-1))

    def forward(self, features) -> Embeddings:
        d_local = self.encode_local(features)
        return Embeddings(d_local, self.encode_global(d_local, features))
