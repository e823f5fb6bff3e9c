# -*- coding: utf-8 -*-
"""Scenario data model and JSONL ingestion.

One JSONL line holds one 5-second sequence sampled at 10 Hz::

    {"scenario_id": ...,
     "agents": [{"id", "observed": [[x, y] x 20],
                 "future": [[x, y] x 30] | null,
                 "focal": bool (optional)}],
     "map": {"polylines": [{"id", "points", "kind", "turn_direction",
                            "is_intersection", "traffic_control"}]},
     "meta": {"template", "maneuver"} (optional)}
"""
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from src.exceptions import ScenarioError

HISTORY_STEPS = 20
FUTURE_STEPS = 30
SAMPLE_RATE_HZ = 10.0
POLYLINE_KINDS = ('centerline', 'boundary')
TURN_DIRECTIONS = ('none', 'left', 'right')
MIN_DISPLACEMENT = 1e-9

logger = logging.getLogger(__name__)


def _frozen_points(values, what, agent_id=None):
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise ScenarioError(f'{what} is not a list of [x, y] pairs',
                            agent_id=agent_id) from None
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ScenarioError(f'{what} must have shape [n, 2], got {arr.shape}',
                            agent_id=agent_id)
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f'{what} has non-finite coordinates',
                            agent_id=agent_id)
    arr.setflags(write=False)
    return arr


def estimate_heading(observed) -> float:
    """Direction of the last nonzero displacement; 0 for a still agent."""
    steps = np.diff(np.asarray(observed), axis=0)
    moving = np.flatnonzero(np.linalg.norm(steps, axis=1) > MIN_DISPLACEMENT)
    if moving.size == 0:
        return 0.0
    dx, dy = steps[moving[-1]]
    return math.atan2(dy, dx)


@dataclass(frozen=True, eq=False)
class AgentTrack:
    """One agent: 20 observed positions and, outside test mode, 30 future."""
    id: str
    observed: np.ndarray
    future: Optional[np.ndarray] = None
    focal: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'id', str(self.id))
        observed = _frozen_points(self.observed, 'observed', self.id)
        if len(observed) != HISTORY_STEPS:
            raise ScenarioError(
                f'observed has {len(observed)} steps, expected '
                f'{HISTORY_STEPS}', agent_id=self.id)
        object.__setattr__(self, 'observed', observed)
        if self.future is not None:
            future = _frozen_points(self.future, 'future', self.id)
            if len(future) != FUTURE_STEPS:
                raise ScenarioError(
                    f'future has {len(future)} steps, expected '
                    f'{FUTURE_STEPS}', agent_id=self.id)
            object.__setattr__(self, 'future', future)

    @property
    def heading(self) -> float:
        return estimate_heading(self.observed)

    @property
    def has_future(self) -> bool:
        return self.future is not None

    def __eq__(self, other):
        if not isinstance(other, AgentTrack):
            return NotImplemented
        return (self.id == other.id and self.focal == other.focal
                and np.array_equal(self.observed, other.observed)
                and ((self.future is None and other.future is None)
                     or (self.future is not None and other.future is not None
                         and np.array_equal(self.future, other.future))))

    def to_record(self) -> dict:
        record = {'id': self.id,
                  'observed': self.observed.tolist(),
                  'future': None if self.future is None
                  else self.future.tolist()}
        if self.focal:
            record['focal'] = True
        return record


@dataclass(frozen=True, eq=False)
class MapPolyline:
    id: str
    points: np.ndarray
    kind: str = 'centerline'
    turn_direction: str = 'none'
    is_intersection: bool = False
    traffic_control: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'id', str(self.id))
        points = _frozen_points(self.points, f'polyline {self.id!r}')
        if len(points) < 2:
            raise ScenarioError(f'polyline {self.id!r} has fewer than 2 '
                                f'points')
        if np.any(np.linalg.norm(np.diff(points, axis=0), axis=1) == 0):
            raise ScenarioError(
                f'polyline {self.id!r} repeats a consecutive point')
        if self.kind not in POLYLINE_KINDS:
            raise ScenarioError(
                f'polyline {self.id!r} has unknown kind {self.kind!r}')
        if self.turn_direction not in TURN_DIRECTIONS:
            raise ScenarioError(
                f'polyline {self.id!r} has unknown turn direction '
                f'{self.turn_direction!r}')
        object.__setattr__(self, 'points', points)

    def __eq__(self, other):
        if not isinstance(other, MapPolyline):
            return NotImplemented
        return (self.id == other.id and self.kind == other.kind
                and self.turn_direction == other.turn_direction
                and self.is_intersection == other.is_intersection
                and self.traffic_control == other.traffic_control
                and np.array_equal(self.points, other.points))

    def to_record(self) -> dict:
        return {'id': self.id,
                'points': self.points.tolist(),
                'kind': self.kind,
                'turn_direction': self.turn_direction,
                'is_intersection': self.is_intersection,
                'traffic_control': self.traffic_control}


@dataclass(frozen=True, eq=False)
class Scenario:
    """Agents and map for one sequence; immutable once built."""
    scenario_id: str
    agents: tuple
    map: tuple = field(default_factory=tuple)
    sample_rate: float = SAMPLE_RATE_HZ
    template: Optional[str] = None
    maneuver: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'scenario_id', str(self.scenario_id))
        object.__setattr__(self, 'agents', tuple(self.agents))
        object.__setattr__(self, 'map', tuple(self.map))
        if not self.agents:
            raise ScenarioError(f'scenario {self.scenario_id!r} has no agents')
        seen = set()
        for agent in self.agents:
            if agent.id in seen:
                raise ScenarioError('duplicate agent id', agent_id=agent.id)
            seen.add(agent.id)

    @property
    def agent_ids(self):
        return [a.id for a in self.agents]

    @property
    def num_agents(self):
        return len(self.agents)

    def agent_index(self, agent_id) -> int:
        for i, agent in enumerate(self.agents):
            if agent.id == agent_id:
                return i
        raise KeyError(f'no agent {agent_id!r} in scenario '
                       f'{self.scenario_id!r}')

    def agent(self, agent_id) -> AgentTrack:
        return self.agents[self.agent_index(agent_id)]

    def observed_array(self) -> np.ndarray:
        return np.stack([a.observed for a in self.agents])

    def future_array(self) -> np.ndarray:
        """[N, 30, 2] with zeros for agents without a future."""
        return np.stack([a.future if a.future is not None
                         else np.zeros((FUTURE_STEPS, 2))
                         for a in self.agents])

    def has_future(self) -> np.ndarray:
        return np.array([a.has_future for a in self.agents])

    def with_agents(self, agents):
        return replace(self, agents=tuple(agents))

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.scenario_id == other.scenario_id
                and self.sample_rate == other.sample_rate
                and self.template == other.template
                and self.maneuver == other.maneuver
                and self.agents == other.agents
                and self.map == other.map)

    def to_record(self) -> dict:
        record = {'scenario_id': self.scenario_id,
                  'agents': [a.to_record() for a in self.agents],
                  'map': {'polylines': [p.to_record() for p in self.map]}}
        meta = {k: v for k, v in (('template', self.template),
                                  ('maneuver', self.maneuver)) if v}
        if meta:
            record['meta'] = meta
        return record

    @classmethod
    def from_record(cls, record: dict):
        if not isinstance(record, dict):
            raise ScenarioError('record is not a JSON object')
        for key in ('scenario_id', 'agents'):
            if key not in record:
                raise ScenarioError(f'record is missing {key!r}')
        if not isinstance(record['agents'], list):
            raise ScenarioError('"agents" must be a list')
        agents = []
        for raw in record['agents']:
            if not isinstance(raw, dict):
                raise ScenarioError('agent record is not a JSON object')
            if 'id' not in raw or 'observed' not in raw:
                raise ScenarioError('agent record needs "id" and "observed"')
            agents.append(AgentTrack(id=raw['id'],
                                     observed=raw['observed'],
                                     future=raw.get('future'),
                                     focal=bool(raw.get('focal', False))))
        map_record = record.get('map') or {}
        if not isinstance(map_record, dict) or not isinstance(
                map_record.get('polylines', []), list):
            raise ScenarioError('"map" must be an object with a '
                                '"polylines" list')
        polylines = []
        for raw in map_record.get('polylines', []):
            if not isinstance(raw, dict):
                raise ScenarioError('polyline record is not a JSON object')
            try:
                polylines.append(MapPolyline(
                    id=raw['id'], points=raw['points'],
                    kind=raw.get('kind', 'centerline'),
                    turn_direction=raw.get('turn_direction', 'none'),
                    is_intersection=bool(raw.get('is_intersection', False)),
                    traffic_control=bool(raw.get('traffic_control', False))))
            except KeyError as e:
                raise ScenarioError(
                    f'polyline record is missing {e}') from None
        meta = record.get('meta') or {}
        if not isinstance(meta, dict):
            raise ScenarioError('"meta" must be a JSON object')
        return cls(scenario_id=record['scenario_id'], agents=agents,
                   map=polylines, template=meta.get('template'),
                   maneuver=meta.get('maneuver'))


def load_scenarios(path, logger=logger) -> list:
    """Read and validate every scenario in a JSONL file.

    :path: JSONL file, one scenario per line (blank lines skipped)
    :returns: list of Scenario in file order
    """
    if not os.path.isfile(path):
        raise ScenarioError(f'data file not found: {path}')
    logger.info(f'reading scenarios from {path}')
    scenarios = []
    with open(path, 'r') as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ScenarioError(f'invalid JSON ({e.msg})',
                                    line=lineno) from None
            try:
                scenarios.append(Scenario.from_record(record))
            except ScenarioError as e:
                raise ScenarioError(e.reason, line=lineno,
                                    agent_id=e.agent_id) from None
    logger.info(f'{len(scenarios)} scenarios loaded from {path}')
    return scenarios


def save_scenarios(scenarios, path, logger=logger):
    """Write scenarios as JSONL; inverse of ``load_scenarios``."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w') as f:
        for scenario in scenarios:
            f.write(json.dumps(scenario.to_record()) + '\n')
    logger.info(f'{len(scenarios)} scenarios written to {path}')
