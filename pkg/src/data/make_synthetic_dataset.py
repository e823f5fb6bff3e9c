# -*- coding: utf-8 -*-
"""Generate synthetic driving scenarios on straight, curved and
intersection road templates.

Agents follow lane paths with a smooth speed profile, so every track is
kinematically plausible: speeds are capped and curvature is bounded by
the tightest lane arc. At intersections the focal agent may go straight
or turn, with an exact, configurable share of turning scenarios; its
history looks the same either way, which makes the future multimodal.
"""
import logging
import math
import os
from pathlib import Path, PurePath

import click
import numpy as np
from dotenv import find_dotenv, load_dotenv

from src.data.scenario import (FUTURE_STEPS, HISTORY_STEPS, SAMPLE_RATE_HZ,
                               AgentTrack, MapPolyline, Scenario,
                               save_scenarios)
from src.settings import SyntheticConfig

TOTAL_STEPS = HISTORY_STEPS + FUTURE_STEPS
DT = 1.0 / SAMPLE_RATE_HZ
PATH_STEP = 0.25
ARM_LENGTH = 120.0
STOP_OFFSET = 10.0

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------ geometry

def straight_path(start, heading, length, step=PATH_STEP):
    s = np.arange(0.0, length + 1e-9, step)
    return np.asarray(start) + np.outer(s, [math.cos(heading),
                                            math.sin(heading)])


def arc_path(start, heading, radius, sweep, step=PATH_STEP):
    """Circular arc; positive sweep turns left."""
    side = 1.0 if sweep > 0 else -1.0
    center = np.asarray(start) + side * radius * np.array(
        [-math.sin(heading), math.cos(heading)])
    n = max(int(math.ceil(abs(sweep) * radius / step)), 1)
    angles = heading - side * math.pi / 2 + np.linspace(0.0, sweep, n + 1)
    return center + radius * np.stack([np.cos(angles), np.sin(angles)], 1)


def end_heading(path):
    d = path[-1] - path[-2]
    return math.atan2(d[1], d[0])


def join(*pieces):
    out = [pieces[0]]
    for piece in pieces[1:]:
        out.append(piece[1:])
    return np.concatenate(out)


def offset(path, distance):
    """Shift a path sideways; positive distance moves it to the left."""
    tangent = np.gradient(path, axis=0)
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    normal = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)
    return path + distance * normal


def position_along(path, stations):
    arc = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(path, axis=0), axis=1))])
    stations = np.clip(stations, 0.0, arc[-1])
    return np.stack([np.interp(stations, arc, path[:, 0]),
                     np.interp(stations, arc, path[:, 1])], axis=1)


def rigid(points, angle, shift):
    c, s = math.cos(angle), math.sin(angle)
    return np.asarray(points) @ np.array([[c, s], [-s, c]]) + shift


# ---------------------------------------------------------------- kinematics

def speed_profile(rng, config, v0=None):
    """Per-step speeds for the whole 5 s window, within [1, speed_cap]."""
    if v0 is None:
        v0 = rng.uniform(config.speed_min, config.speed_max)
    accel = rng.normal(0.0, config.accel_std) if config.accel_std else 0.0
    t = np.arange(TOTAL_STEPS) * DT
    return np.clip(v0 + accel * t, min(1.0, v0), config.speed_cap)


def drive(path, start_station, speeds):
    """Positions at 10 Hz for an agent starting at ``start_station``."""
    stations = start_station + np.concatenate(
        [[0.0], np.cumsum(speeds[:-1] * DT)])
    return position_along(path, stations)


def track(agent_id, positions, focal=False):
    return AgentTrack(id=agent_id,
                      observed=positions[:HISTORY_STEPS],
                      future=positions[HISTORY_STEPS:],
                      focal=focal)


# ----------------------------------------------------------------- templates

def straight_template(rng, config):
    w = config.lane_width
    length = 2 * ARM_LENGTH
    east = straight_path((-ARM_LENGTH, 0.0), 0.0, length)
    west = straight_path((ARM_LENGTH, w), math.pi, length)
    polylines = [
        MapPolyline('lane_e', east[::20], 'centerline'),
        MapPolyline('lane_w', west[::20], 'centerline'),
        MapPolyline('edge_s', offset(east, -w / 2)[::20], 'boundary'),
        MapPolyline('edge_n', offset(east, 1.5 * w)[::20], 'boundary'),
    ]
    speeds = speed_profile(rng, config)
    start = ARM_LENGTH - speeds[:HISTORY_STEPS - 1].sum() * DT
    agents = [track('a0', drive(east, start, speeds), focal=True)]
    n_others = rng.integers(config.min_agents, config.max_agents + 1) - 1
    for j in range(1, n_others + 1):
        speeds = speed_profile(rng, config)
        if rng.random() < 0.5:
            gap = rng.uniform(12.0, 40.0) * rng.choice([-1.0, 1.0])
            path, s0 = east, start + gap
        else:
            path, s0 = west, ARM_LENGTH - rng.uniform(-30.0, 40.0)
        agents.append(track(f'a{j}', drive(path, s0, speeds)))
    return agents, polylines, None


def curved_template(rng, config):
    w = config.lane_width
    radius = rng.uniform(1.0 / config.max_curvature + w, 120.0)
    sweep = rng.choice([-1.0, 1.0]) * rng.uniform(math.pi / 4, math.pi / 2)
    lead = straight_path((-60.0, 0.0), 0.0, 60.0)
    bend = arc_path(lead[-1], 0.0, radius, sweep)
    tail = straight_path(bend[-1], end_heading(bend), 120.0)
    center = join(lead, bend, tail)
    polylines = [
        MapPolyline('lane', center[::20], 'centerline'),
        MapPolyline('edge_l', offset(center, w / 2)[::20], 'boundary'),
        MapPolyline('edge_r', offset(center, -w / 2)[::20], 'boundary'),
    ]
    speeds = speed_profile(rng, config)
    start = 60.0 - speeds[:HISTORY_STEPS - 1].sum() * DT \
        + rng.uniform(-10.0, 5.0)
    agents = [track('a0', drive(center, max(start, 0.0), speeds), True)]
    n_others = rng.integers(config.min_agents, config.max_agents + 1) - 1
    for j in range(1, n_others + 1):
        gap = rng.uniform(12.0, 35.0) * j
        agents.append(track(f'a{j}', drive(center, max(start - gap, 0.0),
                                           speed_profile(rng, config))))
    return agents, polylines, None


def _approach_paths(w):
    """Lane paths for the westbound-origin approach, heading +x."""
    approach = straight_path((-ARM_LENGTH, -w / 2), 0.0,
                             ARM_LENGTH - STOP_OFFSET)
    through = straight_path(approach[-1], 0.0, 2 * STOP_OFFSET)
    left = arc_path(approach[-1], 0.0, STOP_OFFSET + w / 2, math.pi / 2)
    right = arc_path(approach[-1], 0.0, STOP_OFFSET - w / 2, -math.pi / 2)
    exits = {name: straight_path(conn[-1], end_heading(conn),
                                 ARM_LENGTH - STOP_OFFSET)
             for name, conn in (('straight', through), ('left', left),
                                ('right', right))}
    return approach, {'straight': through, 'left': left, 'right': right}, \
        exits


def intersection_template(rng, config, maneuver):
    w = config.lane_width
    approach, connectors, exits = _approach_paths(w)
    polylines = []
    for k in range(4):
        angle = k * math.pi / 2
        rot = lambda p: rigid(p, -angle, 0.0)  # noqa: E731
        polylines.append(MapPolyline(f'in_{k}', rot(approach[::20]),
                                     'centerline', traffic_control=True))
        polylines.append(MapPolyline(f'out_{k}',
                                     rot(exits['straight'][::20]),
                                     'centerline'))
        for name, conn in connectors.items():
            polylines.append(MapPolyline(
                f'conn_{k}_{name}', rot(conn[::4]), 'centerline',
                turn_direction='none' if name == 'straight' else name,
                is_intersection=True))
        for side in (-1.0, 1.0):
            edge = straight_path((-ARM_LENGTH, side * w), 0.0,
                                 ARM_LENGTH - STOP_OFFSET)
            polylines.append(MapPolyline(f'edge_{k}_{int(side)}',
                                         rot(edge[::20]), 'boundary'))

    def route(turn):
        return join(approach, connectors[turn], exits[turn])

    speeds = speed_profile(rng, config)
    to_stop = speeds[HISTORY_STEPS - 1] * rng.uniform(0.3, 1.2)
    start = (ARM_LENGTH - STOP_OFFSET) - to_stop \
        - speeds[:HISTORY_STEPS - 1].sum() * DT
    agents = [track('a0', drive(route(maneuver), max(start, 0.0), speeds),
                    focal=True)]
    n_others = rng.integers(config.min_agents, config.max_agents + 1) - 1
    for j in range(1, n_others + 1):
        arm = int(rng.integers(0, 4))
        path = rigid(route('straight'), -arm * math.pi / 2, 0.0)
        s0 = rng.uniform(40.0, ARM_LENGTH - STOP_OFFSET)
        agents.append(track(f'a{j}', drive(path, s0,
                                           speed_profile(rng, config))))
    return agents, polylines, maneuver


TEMPLATES = ('straight', 'curved', 'intersection')


def _assign_maneuvers(rng, count, turn_ratio):
    n_turn = int(round(turn_ratio * count))
    labels = ['left' if i % 2 == 0 else 'right' for i in range(n_turn)]
    labels += ['straight'] * (count - n_turn)
    return [labels[i] for i in rng.permutation(count)]


def generate_synthetic(count, seed, config=None, logger=logger):
    """Deterministically generate ``count`` scenarios from ``seed``.

    :config: SyntheticConfig; template weights, speeds, turn ratio
    :returns: list of Scenario
    """
    if count < 1:
        raise ValueError(f'count must be >= 1, got {count}')
    config = config or SyntheticConfig()
    names = [n for n in TEMPLATES if config.templates.get(n, 0.0) > 0]
    weights = np.array([config.templates[n] for n in names], dtype=float)
    rng = np.random.default_rng(seed)
    kinds = rng.choice(names, size=count, p=weights / weights.sum())
    n_int = int(np.sum(kinds == 'intersection'))
    maneuvers = iter(_assign_maneuvers(rng, n_int, config.turn_ratio))
    logger.info(f'generating {count} scenarios from seed {seed}: '
                + ', '.join(f'{n}={int(np.sum(kinds == n))}' for n in names))
    scenarios = []
    for i, kind in enumerate(kinds):
        local = np.random.default_rng([seed, i])
        if kind == 'straight':
            agents, polylines, maneuver = straight_template(local, config)
        elif kind == 'curved':
            agents, polylines, maneuver = curved_template(local, config)
        else:
            agents, polylines, maneuver = intersection_template(
                local, config, next(maneuvers))
        angle = local.uniform(0.0, 2 * math.pi)
        shift = local.uniform(-500.0, 500.0, size=2)
        agents = [AgentTrack(a.id, rigid(a.observed, angle, shift),
                             rigid(a.future, angle, shift), a.focal)
                  for a in agents]
        polylines = [MapPolyline(p.id, rigid(p.points, angle, shift), p.kind,
                                 p.turn_direction, p.is_intersection,
                                 p.traffic_control) for p in polylines]
        scenarios.append(Scenario(scenario_id=f'syn-{seed}-{i:05d}',
                                  agents=agents, map=polylines,
                                  template=str(kind), maneuver=maneuver))
    return scenarios


@click.command()
@click.argument('output_dir', type=click.Path(file_okay=False))
@click.option('--train', 'train_count', default=2000, show_default=True)
@click.option('--val', 'val_count', default=400, show_default=True)
@click.option('--seed', default=0, show_default=True)
def main(output_dir, train_count, val_count, seed):
    """ Generates train/val synthetic scenario sets as JSONL in
        OUTPUT_DIR (e.g. data/processed).
    """
    logger = logging.getLogger(__name__)
    absolute_output_dir = PurePath(project_dir).joinpath(output_dir)
    os.makedirs(absolute_output_dir, exist_ok=True)
    config = SyntheticConfig()
    train = generate_synthetic(train_count, seed, config, logger)
    save_scenarios(train, absolute_output_dir.joinpath('train.jsonl'), logger)
    val = generate_synthetic(val_count, seed + 1, config, logger)
    save_scenarios(val, absolute_output_dir.joinpath('val.jsonl'), logger)


if __name__ == '__main__':
    project_dir = Path(__file__).resolve().parents[2]

    os.makedirs(PurePath(project_dir).joinpath('logs'), exist_ok=True)
    log_path = PurePath(project_dir).joinpath(
        'logs/make_synthetic_dataset.log')
    log_fmt = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    logging.basicConfig(filename=log_path, level=logging.INFO, format=log_fmt)

    load_dotenv(find_dotenv())

    main()
