# -*- coding: utf-8 -*-
"""Turn a Scenario into the constant arrays the encoder consumes.

All geometry is expressed in the frame of the agent that owns the row;
lengths are divided by ``scale`` so inputs stay near unit magnitude.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from src.features.agent_frames import AgentFrame, lane_segments
from src.data.scenario import estimate_heading
from src.settings import SceneConfig

logger = logging.getLogger(__name__)

AGENT_STEP_DIM = 3
NEIGHBOR_DIM = 5
LANE_DIM = 10
PAIR_DIM = 4


@dataclass(frozen=True)
class ScenarioFeatures:
    """
    :agent_steps: [N, T_p, 3] own displacement (dx, dy) and a valid flag
    :neighbor_tokens: [N, N, T_p, 5] other agent's relative position and
        displacement plus a valid flag, in the row agent's frame
    :neighbor_mask: [N, N] True where column agent is a neighbor of row
    :lane_tokens: [N, S, 10] segment midpoint, direction and flags
    :lane_mask: [N, S] True where the segment lies within the radius
    :pair_pose: [N, N, 4] (dx, dy, cos dheading, sin dheading) of column
        agent relative to row agent
    :future_local: [N, T_f, 2] ground-truth future in own frame, meters
    """
    scenario_id: str
    agent_ids: tuple
    frames: tuple
    agent_steps: np.ndarray
    neighbor_tokens: np.ndarray
    neighbor_mask: np.ndarray
    lane_tokens: np.ndarray
    lane_mask: np.ndarray
    pair_pose: np.ndarray
    future_local: np.ndarray
    has_future: np.ndarray
    focal: np.ndarray

    @property
    def num_agents(self):
        return len(self.agent_ids)


def _rotations(headings):
    c, s = np.cos(headings), np.sin(headings)
    # local -> global, one [2, 2] per agent
    return np.stack([np.stack([c, -s], axis=-1),
                     np.stack([s, c], axis=-1)], axis=-2)


def build_features(scenario, scene_config=None, scale=10.0):
    cfg = scene_config or SceneConfig()
    observed = scenario.observed_array()
    n, steps = observed.shape[:2]
    headings = np.array([estimate_heading(a.observed)
                         for a in scenario.agents])
    origins = observed[:, -1, :]
    rot = _rotations(headings)

    disp = np.zeros_like(observed)
    disp[:, 1:] = np.diff(observed, axis=1)
    valid = np.ones((n, steps, 1))
    valid[:, 0] = 0.0
    own = np.einsum('ntd,nde->nte', disp, rot) / scale
    agent_steps = np.concatenate([own, valid], axis=-1)

    rel_pos = observed[None, :, :, :] - observed[:, None, :, :]
    rel_pos = np.einsum('ijtd,ide->ijte', rel_pos, rot) / scale
    rel_disp = np.einsum('jtd,ide->ijte', disp, rot) / scale
    valid_pairs = np.broadcast_to(valid[None], (n, n, steps, 1))
    neighbor_tokens = np.concatenate([rel_pos, rel_disp, valid_pairs], -1)

    last_gap = np.linalg.norm(origins[None, :, :] - origins[:, None, :],
                              axis=-1)
    neighbor_mask = (last_gap <= cfg.radius) & ~np.eye(n, dtype=bool)

    segments = lane_segments(scenario, cfg.segment_length)
    if len(segments):
        rel_mid = segments.midpoints[None, :, :] - origins[:, None, :]
        lane_mask = np.linalg.norm(rel_mid, axis=-1) <= cfg.radius
        # segments nobody can see carry no information
        seen = lane_mask.any(axis=0)
        if not seen.any():
            seen[0] = True
        rel_mid, lane_mask = rel_mid[:, seen], lane_mask[:, seen]
        segments_dirs, segments_flags = (segments.directions[seen],
                                         segments.flags[seen])
        mid_local = np.einsum('isd,ide->ise', rel_mid, rot) / scale
        dir_local = np.einsum('sd,ide->ise', segments_dirs, rot)
        flags = np.broadcast_to(segments_flags[None],
                                (n,) + segments_flags.shape)
        lane_tokens = np.concatenate([mid_local, dir_local, flags], -1)
    else:
        lane_tokens = np.zeros((n, 1, LANE_DIM))
        lane_mask = np.zeros((n, 1), dtype=bool)

    rel_origin = np.einsum('ijd,ide->ije',
                           origins[None, :, :] - origins[:, None, :],
                           rot) / scale
    dtheta = headings[None, :] - headings[:, None]
    pair_pose = np.concatenate([rel_origin, np.cos(dtheta)[..., None],
                                np.sin(dtheta)[..., None]], axis=-1)

    future_local = np.einsum('ntd,nde->nte',
                             scenario.future_array() - origins[:, None, :],
                             rot)
    return ScenarioFeatures(
        scenario_id=scenario.scenario_id,
        agent_ids=tuple(scenario.agent_ids),
        frames=tuple(AgentFrame(origins[i].copy(), float(headings[i]))
                     for i in range(n)),
        agent_steps=agent_steps,
        neighbor_tokens=neighbor_tokens,
        neighbor_mask=neighbor_mask,
        lane_tokens=lane_tokens,
        lane_mask=lane_mask,
        pair_pose=pair_pose,
        future_local=future_local,
        has_future=scenario.has_future(),
        focal=np.array([a.focal for a in scenario.agents]))


def build_feature_set(scenarios, scene_config=None, scale=10.0, workers=1,
                      logger=logger):
    """Featurize many scenarios, preserving order."""
    logger.info(f'building features for {len(scenarios)} scenarios '
                f'with {workers} worker(s)')
    if workers <= 1:
        return [build_features(s, scene_config, scale) for s in scenarios]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(
            lambda s: build_features(s, scene_config, scale), scenarios))
