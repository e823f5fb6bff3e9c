# -*- coding: utf-8 -*-
"""Agent-centric frames, lane segments and neighborhood queries.

A frame is anchored at an agent's last observed position and rotated so
its heading points along +x; everything the encoder sees is expressed in
such frames, which makes the features independent of where the scene
sits in the world.
"""
import math
from dataclasses import dataclass

import numpy as np

from src.data.scenario import estimate_heading

DEFAULT_RADIUS = 50.0
DEFAULT_SEGMENT_LENGTH = 2.0


def rotation_matrix(angle) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class AgentFrame:
    origin: np.ndarray
    heading: float

    @property
    def rotation(self) -> np.ndarray:
        """Local -> global rotation."""
        return rotation_matrix(self.heading)

    def to_local(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return (points - self.origin) @ self.rotation

    def to_global(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.origin

    def vectors_to_local(self, vectors) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.rotation


def agent_frame(agent) -> AgentFrame:
    return AgentFrame(origin=np.array(agent.observed[-1], dtype=np.float64),
                      heading=estimate_heading(agent.observed))


@dataclass(frozen=True)
class LocalView:
    """A scenario seen from one agent's frame."""
    agent_id: str
    frame: AgentFrame
    observed: np.ndarray
    future: np.ndarray
    has_future: np.ndarray
    polylines: tuple

    def to_global(self, points):
        return self.frame.to_global(points)


def normalize_agent_frame(scenario, agent_id) -> LocalView:
    """Express every track and polyline in ``agent_id``'s frame."""
    frame = agent_frame(scenario.agent(agent_id))
    return LocalView(agent_id=agent_id,
                     frame=frame,
                     observed=frame.to_local(scenario.observed_array()),
                     future=frame.to_local(scenario.future_array()),
                     has_future=scenario.has_future(),
                     polylines=tuple(frame.to_local(p.points)
                                     for p in scenario.map))


def resample_polyline(points, segment_length=DEFAULT_SEGMENT_LENGTH):
    """Resample a polyline at fixed arc-length spacing.

    The final point is always kept, so the last segment may be shorter.
    """
    points = np.asarray(points, dtype=np.float64)
    arc = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
    stations = np.arange(0.0, arc[-1], segment_length)
    if arc[-1] - stations[-1] > 1e-9:
        stations = np.append(stations, arc[-1])
    return np.stack([np.interp(stations, arc, points[:, 0]),
                     np.interp(stations, arc, points[:, 1])], axis=1)


@dataclass(frozen=True)
class LaneSegments:
    """Fixed-length pieces of every map polyline.

    :midpoints: [S, 2] global reference points
    :directions: [S, 2] unit direction vectors
    :flags: [S, 6] centerline, turn none/left/right, intersection, control
    :polyline_ids, segment_index: provenance of each segment
    """
    midpoints: np.ndarray
    directions: np.ndarray
    flags: np.ndarray
    polyline_ids: tuple
    segment_index: tuple

    def __len__(self):
        return len(self.midpoints)


def lane_segments(scenario, segment_length=DEFAULT_SEGMENT_LENGTH):
    mids, dirs, flags, ids, index = [], [], [], [], []
    for polyline in scenario.map:
        pts = resample_polyline(polyline.points, segment_length)
        starts, ends = pts[:-1], pts[1:]
        delta = ends - starts
        length = np.linalg.norm(delta, axis=1, keepdims=True)
        keep = length[:, 0] > 0
        mids.append((0.5 * (starts + ends))[keep])
        dirs.append((delta / np.maximum(length, 1e-12))[keep])
        row = [float(polyline.kind == 'centerline'),
               float(polyline.turn_direction == 'none'),
               float(polyline.turn_direction == 'left'),
               float(polyline.turn_direction == 'right'),
               float(polyline.is_intersection),
               float(polyline.traffic_control)]
        flags.append(np.tile(row, (int(keep.sum()), 1)))
        ids.extend([polyline.id] * int(keep.sum()))
        index.extend(range(int(keep.sum())))
    if not mids:
        empty = np.zeros((0, 2))
        return LaneSegments(empty, empty, np.zeros((0, 6)), (), ())
    return LaneSegments(np.concatenate(mids), np.concatenate(dirs),
                        np.concatenate(flags), tuple(ids), tuple(index))


@dataclass(frozen=True)
class Neighborhood:
    agent_ids: tuple
    segments: tuple  # (polyline_id, segment_index) pairs


def neighbor_query(scenario, agent_id, radius=DEFAULT_RADIUS,
                   segment_length=DEFAULT_SEGMENT_LENGTH,
                   segments=None) -> Neighborhood:
    """Agents and lane segments within ``radius`` of the anchor.

    Distances are measured from the anchor's last observed position to
    each other agent's last observed position and to each lane segment's
    midpoint; the boundary is inclusive.
    """
    if radius <= 0:
        raise ValueError(f'radius must be positive, got {radius}')
    anchor = scenario.agent(agent_id).observed[-1]
    agents = tuple(a.id for a in scenario.agents
                   if a.id != agent_id
                   and np.linalg.norm(a.observed[-1] - anchor) <= radius)
    if segments is None:
        segments = lane_segments(scenario, segment_length)
    near = np.flatnonzero(
        np.linalg.norm(segments.midpoints - anchor, axis=1) <= radius)
    return Neighborhood(agent_ids=agents,
                        segments=tuple((segments.polyline_ids[i],
                                        segments.segment_index[i])
                                       for i in near))
