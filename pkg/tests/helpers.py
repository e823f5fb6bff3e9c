"""Scenario builders shared by the test modules."""
import numpy as np

from src.data.make_synthetic_dataset import rigid
from src.data.scenario import (FUTURE_STEPS, HISTORY_STEPS, AgentTrack,
                               MapPolyline, Scenario)

TINY = {
    'model': {'hidden': 16, 'heads': 2, 'interaction_layers': 1,
              'temporal_layers': 1, 'global_layers': 1,
              'denoiser_blocks': 1, 'modes': 3, 'diffusion_steps': 50,
              'beta_start': 1e-4, 'beta_end': 0.2, 'estimator_width': 24,
              'decoder_hidden': 16, 'mlp_prior_hidden': 16},
    'train': {'epochs': 2, 'batch_size': 2, 'dtype': 'float64',
              'checkpoint_every': 0, 'log_every': 0, 'val_limit': 2,
              'gamma': 3},
    'inference': {'gamma': 3},
    'eval': {'repeats': 1},
}


def straight_track(agent_id, start=(0.0, 0.0), heading=0.0, speed=10.0,
                   with_future=True, focal=False):
    """Constant-velocity agent sampled at 10 Hz."""
    direction = np.array([np.cos(heading), np.sin(heading)])
    t = np.arange(HISTORY_STEPS + FUTURE_STEPS) * 0.1
    points = np.asarray(start) + speed * t[:, None] * direction
    return AgentTrack(agent_id, points[:HISTORY_STEPS],
                      points[HISTORY_STEPS:] if with_future else None,
                      focal)


def two_lane_scenario(scenario_id='s0'):
    lane = MapPolyline('lane', [[-50.0, 0.0], [0.0, 0.0], [80.0, 0.0]])
    edge = MapPolyline('edge', [[-50.0, -2.0], [80.0, -2.0]], 'boundary')
    agents = [straight_track('a0', (-20.0, 0.0), focal=True),
              straight_track('a1', (-5.0, 0.0), speed=8.0),
              straight_track('a2', (40.0, 3.5), heading=np.pi, speed=6.0)]
    return Scenario(scenario_id, agents, [lane, edge])


def moved(scenario, angle, shift):
    """The same scenario under a rigid motion of the plane."""
    agents = [AgentTrack(a.id, rigid(a.observed, angle, shift),
                         None if a.future is None
                         else rigid(a.future, angle, shift), a.focal)
              for a in scenario.agents]
    polylines = [MapPolyline(p.id, rigid(p.points, angle, shift), p.kind,
                             p.turn_direction, p.is_intersection,
                             p.traffic_control) for p in scenario.map]
    return Scenario(scenario.scenario_id, agents, polylines)
