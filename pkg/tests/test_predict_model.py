import json

import numpy as np
import pytest

from src.exceptions import InferenceError, ScenarioError
from src.models.predict_model import (infer, infer_baseline, predict_all,
                                      read_predictions, refinement_labels,
                                      scenario_seed, write_predictions)
from src.settings import InferenceConfig

from tests.helpers import moved, two_lane_scenario


def test_infer_calls_the_denoiser_gamma_times(tiny_model, scenario):
    pred = infer(scenario, tiny_model, seed=1)
    assert pred.denoiser_calls == 3
    assert pred.gamma == 3
    assert pred.sampler == 'estimator+ddpm'
    assert pred.trajectories.shape == (3, 30, 2, 3)
    assert pred.agent_ids == ('a0', 'a1', 'a2')
    np.testing.assert_allclose(pred.probabilities.sum(axis=1), 1.0)
    assert np.isfinite(pred.trajectories).all()
    assert infer(scenario, tiny_model, gamma=7).denoiser_calls == 7


def test_infer_is_seeded(tiny_model, scenario):
    a = infer(scenario, tiny_model, seed=5)
    b = infer(scenario, tiny_model, seed=5)
    c = infer(scenario, tiny_model, seed=6)
    np.testing.assert_array_equal(a.trajectories, b.trajectories)
    assert not np.allclose(a.trajectories, c.trajectories)


def test_gamma_one_ddpm_is_deterministic(tiny_model, scenario):
    a = infer(scenario, tiny_model, gamma=1, seed=1)
    b = infer(scenario, tiny_model, gamma=1, seed=2)
    np.testing.assert_allclose(a.trajectories, b.trajectories)


def test_gamma_out_of_range(tiny_model, scenario):
    with pytest.raises(InferenceError, match='gamma'):
        infer(scenario, tiny_model, gamma=51)
    with pytest.raises(InferenceError):
        infer(scenario, tiny_model, gamma=0)


def test_prediction_follows_rigid_motion(tiny_model, scenario):
    angle, shift = 1.1, np.array([120.0, -40.0])
    base = infer(scenario, tiny_model, seed=2)
    other = infer(moved(scenario, angle, shift), tiny_model, seed=2)
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    expected = np.einsum('ij,ntjk->ntik', rot, base.trajectories) \
        + shift[None, None, :, None]
    np.testing.assert_allclose(other.trajectories, expected, atol=1e-3)
    np.testing.assert_allclose(other.probabilities, base.probabilities,
                               atol=1e-6)


def test_refinement_labels():
    literal, method = refinement_labels(5, InferenceConfig())
    np.testing.assert_array_equal(literal, [5, 4, 3, 2, 1])
    assert method == 'ddpm'
    tail, method = refinement_labels(
        5, InferenceConfig(label_mode='tail', tail_span=50))
    assert method == 'ddim'
    assert len(tail) == 5
    assert tail[0] == 50 and tail[-1] == 1


def test_tail_labels_still_cost_gamma_calls(tiny_model, scenario):
    config = InferenceConfig(gamma=4, label_mode='tail', tail_span=20)
    pred = infer(scenario, tiny_model, inference_config=config)
    assert pred.denoiser_calls == 4
    assert pred.sampler == 'estimator+ddim'


def test_baseline_call_counts(tiny_model, scenario):
    ddpm = infer_baseline(scenario, tiny_model, 'ddpm', steps=50)
    assert ddpm.denoiser_calls == 50
    ddim = infer_baseline(scenario, tiny_model, 'ddim', steps=5)
    assert ddim.denoiser_calls == 5
    np.testing.assert_allclose(ddim.probabilities, 1.0 / 3)
    assert infer_baseline(scenario, tiny_model, 'ddim', steps=5,
                          modes=8).modes == 8


def test_baseline_rejects_bad_requests(tiny_model, scenario):
    with pytest.raises(InferenceError, match='steps must equal'):
        infer_baseline(scenario, tiny_model, 'ddpm', steps=10)
    with pytest.raises(InferenceError, match='unknown sampler'):
        infer_baseline(scenario, tiny_model, 'euler', steps=10)


def test_scenario_seed_is_stable():
    assert scenario_seed(0, 3) == scenario_seed(0, 3)
    assert scenario_seed(0, 3) != scenario_seed(0, 4)
    assert scenario_seed(1, 3) != scenario_seed(0, 3)


def test_predict_all_ignores_worker_count(tiny_model, synthetic_scenarios):
    serial = predict_all(synthetic_scenarios, tiny_model, seed=4, workers=1)
    pooled = predict_all(synthetic_scenarios, tiny_model, seed=4, workers=3)
    assert [p.scenario_id for p in pooled] == \
        [s.scenario_id for s in synthetic_scenarios]
    for a, b in zip(serial, pooled):
        np.testing.assert_array_equal(a.trajectories, b.trajectories)
        assert a.seed == b.seed


def test_predict_all_baseline(tiny_model, synthetic_scenarios):
    preds = predict_all(synthetic_scenarios[:2], tiny_model, method='ddim',
                        steps=2)
    assert all(p.denoiser_calls == 2 and p.sampler == 'ddim'
               for p in preds)


def test_predictions_file_round_trip(tmp_path, tiny_model):
    preds = predict_all([two_lane_scenario('x'), two_lane_scenario('y')],
                        tiny_model)
    path = tmp_path / 'pred.jsonl'
    write_predictions(preds, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 6
    record = json.loads(lines[0])
    assert record['scenario_id'] == 'x' and record['agent_id'] == 'a0'
    assert len(record['modes']) == 3
    assert len(record['modes'][0]['trajectory']) == 30
    assert record['meta']['gamma'] == 3
    back = read_predictions(path)
    assert [p.scenario_id for p in back] == ['x', 'y']
    for a, b in zip(preds, back):
        assert a.agent_ids == b.agent_ids
        np.testing.assert_allclose(b.trajectories, a.trajectories)
        np.testing.assert_allclose(b.probabilities, a.probabilities)
        assert (b.gamma, b.sampler, b.seed) == (a.gamma, a.sampler, a.seed)


def test_read_predictions_errors(tmp_path):
    with pytest.raises(ScenarioError, match='not found'):
        read_predictions(tmp_path / 'absent.jsonl')
    path = tmp_path / 'bad.jsonl'
    path.write_text('{"scenario_id": "s", "agent_id": "a"}\n')
    with pytest.raises(ScenarioError) as info:
        read_predictions(path)
    assert info.value.line == 1
