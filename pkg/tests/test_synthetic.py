import numpy as np
import pytest

from src.data.add_observation_noise import inject_noise, inject_noise_all
from src.data.make_synthetic_dataset import generate_synthetic
from src.data.scenario import Scenario
from src.settings import SyntheticConfig

from tests.helpers import straight_track


def test_same_seed_same_scenarios():
    assert generate_synthetic(3, 5) == generate_synthetic(3, 5)
    assert generate_synthetic(3, 5) != generate_synthetic(3, 6)


def test_ids_focal_and_lengths():
    scenarios = generate_synthetic(6, 2)
    assert [s.scenario_id for s in scenarios] == [
        f'syn-2-{i:05d}' for i in range(6)]
    for s in scenarios:
        assert s.agents[0].id == 'a0' and s.agents[0].focal
        assert 2 <= s.num_agents <= 6
        assert all(a.has_future for a in s.agents)
        assert len(s.map) > 0


def test_speeds_stay_within_cap():
    config = SyntheticConfig()
    for s in generate_synthetic(20, 3, config):
        for a in s.agents:
            path = np.concatenate([a.observed, a.future])
            speed = np.linalg.norm(np.diff(path, axis=0), axis=1) * 10.0
            assert speed.max() <= config.speed_cap + 1e-6


def test_turn_ratio_is_exact_over_intersections():
    config = SyntheticConfig(templates={'intersection': 1.0}, turn_ratio=0.5)
    scenarios = generate_synthetic(20, 4, config)
    turns = [s.maneuver for s in scenarios]
    assert sum(m in ('left', 'right') for m in turns) == 10
    assert sum(m == 'straight' for m in turns) == 10


def test_count_must_be_positive():
    with pytest.raises(ValueError):
        generate_synthetic(0, 1)


def test_noise_leaves_futures_and_map(synthetic_scenarios):
    scenario = synthetic_scenarios[0]
    noisy = inject_noise(scenario, 0.5, seed=3)
    np.testing.assert_array_equal(noisy.future_array(),
                                  scenario.future_array())
    assert noisy.map == scenario.map


def test_noise_std_over_many_points():
    # 2500 agents x 20 steps x 2 coordinates = 1e5 noisy values
    crowd = Scenario('crowd', [straight_track(f'a{i}', (0.0, 4.0 * i))
                               for i in range(2500)])
    noisy = inject_noise(crowd, 0.6, seed=17)
    residual = noisy.observed_array() - crowd.observed_array()
    assert residual.size == 100_000
    assert residual.std() == pytest.approx(0.6, rel=0.02)
    assert abs(residual.mean()) < 0.01


def test_noise_zero_sigma_and_negative_sigma(synthetic_scenarios):
    scenario = synthetic_scenarios[0]
    assert inject_noise(scenario, 0.0, 1) == scenario
    with pytest.raises(ValueError):
        inject_noise(scenario, -0.1, 1)


def test_noise_is_seeded_per_scenario(synthetic_scenarios):
    a = inject_noise_all(synthetic_scenarios, 0.3, 9)
    b = inject_noise_all(synthetic_scenarios, 0.3, 9)
    assert a == b
    assert a[1] == inject_noise(synthetic_scenarios[1], 0.3, [9, 1])


def arc_curvature(points, spacing=3.0):
    """Circumscribed-circle curvature of points resampled by arc length."""
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    moving = steps > 1e-9
    points = np.concatenate([points[:1], points[1:][moving]])
    arc = np.concatenate([[0.0], np.cumsum(steps[moving])])
    stations = np.arange(0.0, arc[-1], spacing)
    p = np.stack([np.interp(stations, arc, points[:, 0]),
                  np.interp(stations, arc, points[:, 1])], axis=1)
    a, b, c = p[:-2], p[1:-1], p[2:]
    u, v = b - a, c - a
    twice_area = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
    sides = (np.linalg.norm(u, axis=1) * np.linalg.norm(c - b, axis=1)
             * np.linalg.norm(v, axis=1))
    return 2.0 * twice_area / sides


@pytest.mark.parametrize('template', ['curved', 'intersection'])
def test_curvature_stays_within_bound(template):
    config = SyntheticConfig(templates={template: 1.0}, turn_ratio=1.0)
    for s in generate_synthetic(30, 6, config):
        for a in s.agents:
            path = np.concatenate([a.observed, a.future])
            kappa = arc_curvature(path)
            if len(kappa):
                assert kappa.max() <= config.max_curvature, (s.scenario_id,
                                                             a.id)


def test_straight_template_constant_velocity():
    config = SyntheticConfig(templates={'straight': 1.0}, speed_min=10.0,
                             speed_max=10.0, accel_std=0.0)
    for s in generate_synthetic(5, 8, config):
        for a in s.agents:
            step = np.linalg.norm(np.diff(a.future, axis=0), axis=1)
            np.testing.assert_allclose(step, 1.0, atol=1e-9)
