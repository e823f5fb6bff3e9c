import numpy as np
import pytest

from src.data.scenario import MapPolyline, Scenario
from src.features.agent_frames import (agent_frame, lane_segments,
                                       neighbor_query, normalize_agent_frame,
                                       resample_polyline)
from src.features.build_features import build_features

from tests.helpers import moved, straight_track, two_lane_scenario


def test_frame_round_trip_and_heading_alignment():
    agent = straight_track('a', (3.0, -4.0), heading=0.7)
    frame = agent_frame(agent)
    local = frame.to_local(agent.observed)
    np.testing.assert_allclose(local[-1], [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(local[:, 1], 0.0, atol=1e-9)
    assert np.all(np.diff(local[:, 0]) > 0)
    np.testing.assert_allclose(frame.to_global(local), agent.observed,
                               atol=1e-9)


def test_normalized_view_matches_frame():
    scenario = two_lane_scenario()
    view = normalize_agent_frame(scenario, 'a1')
    np.testing.assert_allclose(view.observed[1, -1], [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(view.to_global(view.future[0]),
                               scenario.agent('a0').future, atol=1e-9)


def test_neighbor_radius_is_inclusive():
    # all three move in parallel, so final gaps equal initial offsets
    anchor = straight_track('a', (0.0, 0.0))
    near = straight_track('near', (0.0, 49.9))
    far = straight_track('far', (0.0, -50.1))
    scenario = Scenario('s', [anchor, near, far])
    hood = neighbor_query(scenario, 'a', radius=50.0)
    assert hood.agent_ids == ('near',)
    with pytest.raises(ValueError):
        neighbor_query(scenario, 'a', radius=0.0)


def test_lane_segments_within_radius():
    lane = MapPolyline('l', [[0.0, 0.0], [200.0, 0.0]])
    scenario = Scenario('s', [straight_track('a', (-19.0, 0.0))], [lane])
    segments = lane_segments(scenario)
    assert len(segments) == 100
    hood = neighbor_query(scenario, 'a', radius=50.0)
    # anchor ends at x = 0; midpoints at 1, 3, ..., 49
    assert len(hood.segments) == 25


def test_resample_polyline_keeps_endpoints():
    points = resample_polyline([[0.0, 0.0], [5.0, 0.0]], 2.0)
    np.testing.assert_allclose(points[:, 0], [0.0, 2.0, 4.0, 5.0])


def test_features_are_invariant_to_rigid_motion():
    scenario = two_lane_scenario()
    a = build_features(scenario)
    b = build_features(moved(scenario, 1.1, np.array([250.0, -75.0])))
    for name in ('agent_steps', 'neighbor_tokens', 'lane_tokens',
                 'pair_pose', 'future_local'):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name),
                                   atol=1e-9, err_msg=name)
    np.testing.assert_array_equal(a.neighbor_mask, b.neighbor_mask)
    np.testing.assert_array_equal(a.lane_mask, b.lane_mask)


def test_feature_shapes_and_masks():
    scenario = two_lane_scenario()
    f = build_features(scenario)
    n = scenario.num_agents
    assert f.agent_steps.shape == (n, 20, 3)
    assert f.neighbor_tokens.shape == (n, n, 20, 5)
    assert f.pair_pose.shape == (n, n, 4)
    assert f.future_local.shape == (n, 30, 2)
    assert not f.neighbor_mask.diagonal().any()
    assert f.lane_tokens.shape[0] == n and f.lane_tokens.shape[2] == 10


def test_empty_map_gets_one_masked_token():
    scenario = Scenario('s', [straight_track('a'), straight_track('b',
                                                                  (0, 5))])
    f = build_features(scenario)
    assert f.lane_tokens.shape == (2, 1, 10)
    assert not f.lane_mask.any()
