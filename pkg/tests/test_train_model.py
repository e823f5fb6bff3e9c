from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.data.scenario import Scenario
from src.exceptions import CheckpointError, ScenarioError
from src.models.forecaster import Forecaster
from src.models.train_model import (HISTORY_COLUMNS, load_history,
                                    save_history, stage1_loss, train_stage1,
                                    train_stage2)
from src.settings import settings_from_dict

from tests.helpers import TINY, straight_track, two_lane_scenario


@pytest.fixture(scope='module')
def stage1(synthetic_scenarios):
    settings = settings_from_dict(TINY)
    model, history = train_stage1(synthetic_scenarios, settings,
                                  progress=False)
    return settings, model, history


def test_stage1_history(stage1):
    _, model, history = stage1
    assert model.stage == 1
    assert list(history.columns) == HISTORY_COLUMNS
    assert list(history['epoch']) == [1, 2]
    assert (history['stage'] == 1).all()
    assert np.isfinite(history['eps_mse']).all()
    assert (history['ce'] == 0).all()


def test_stage1_only_moves_the_backbone(stage1, tiny_settings):
    _, model, _ = stage1
    fresh = Forecaster(tiny_settings, seed=0, dtype='float64')
    assert model.store.checksum('encoder.') != fresh.store.checksum('encoder.')
    assert model.store.checksum('denoiser.') != \
        fresh.store.checksum('denoiser.')
    assert model.store.checksum('estimator.') == \
        fresh.store.checksum('estimator.')
    assert model.store.checksum('heads.') == fresh.store.checksum('heads.')


def test_stage1_is_deterministic(stage1, synthetic_scenarios):
    settings, model, history = stage1
    again, history_again = train_stage1(synthetic_scenarios,
                                        settings_from_dict(TINY),
                                        progress=False)
    assert again.store.checksum() == model.store.checksum()
    np.testing.assert_allclose(history_again['loss'], history['loss'])


def test_stage1_loss_skips_scenarios_without_futures(tiny_model):
    scenario = Scenario('blind', [straight_track('a', with_future=False)])
    features = tiny_model.featurize(scenario)
    assert stage1_loss(tiny_model, features, np.random.default_rng(0),
                       tiny_model.settings.train) is None


def test_stage1_loss_terms(tiny_model, scenario):
    features = tiny_model.featurize(scenario)
    loss, terms = stage1_loss(tiny_model, features,
                              np.random.default_rng(0),
                              tiny_model.settings.train)
    assert loss.shape == ()
    assert terms['eps_mse'] > 0
    assert loss.item() == pytest.approx(
        terms['eps_mse'] + 0.1 * terms['nll'])


def test_empty_dataset_is_an_error(tiny_settings):
    scenario = Scenario('blind', [straight_track('a', with_future=False)])
    with pytest.raises(ScenarioError, match='no scenarios'):
        train_stage1([scenario], tiny_settings, progress=False)


def test_stage2_needs_a_stage1_model(tmp_path, tiny_settings, tiny_model):
    scenarios = [two_lane_scenario()]
    with pytest.raises(CheckpointError):
        train_stage2(scenarios, tiny_settings, None)
    with pytest.raises(CheckpointError):
        train_stage2(scenarios, tiny_settings, tiny_model)
    with pytest.raises(CheckpointError, match='not found'):
        train_stage2(scenarios, tiny_settings, tmp_path / 'stage1.ckpt')


def test_stage2_freezes_the_backbone(stage1, synthetic_scenarios, tmp_path):
    settings, model, _ = stage1
    start = Forecaster.load(_saved(model, tmp_path))
    backbone = start.store.checksum('encoder.') + \
        start.store.checksum('denoiser.')
    prior = start.store.checksum('estimator.')
    trained, history = train_stage2(synthetic_scenarios, settings, start,
                                    out_dir=tmp_path / 'run',
                                    progress=False)
    assert trained.stage == 2
    assert trained.store.checksum('encoder.') + \
        trained.store.checksum('denoiser.') == backbone
    assert trained.store.checksum('estimator.') != prior
    assert np.isnan(history['eps_mse']).all()
    assert (history['ce'] > 0).all()
    assert (tmp_path / 'run' / 'stage2.ckpt').is_file()
    saved = load_history(tmp_path / 'run' / 'history_stage2.csv')
    np.testing.assert_allclose(saved['loss'], history['loss'])


def test_stage2_swaps_in_the_mlp_prior(stage1, synthetic_scenarios):
    settings, model, _ = stage1
    mlp_settings = settings_from_dict(TINY)
    mlp_settings.model.prior = 'mlp'
    mlp_settings.train.epochs = 1
    trained, _ = train_stage2(synthetic_scenarios[:2], mlp_settings, model,
                              progress=False)
    assert trained.prior_prefix == 'mlp_prior.'
    assert trained.store.checksum('denoiser.') == \
        model.store.checksum('denoiser.')


def test_history_round_trip(tmp_path):
    rows = [{'epoch': 1, 'stage': 1, 'loss': 0.5, 'eps_mse': 0.4,
             'nll': 1.0, 'ce': 0.0, 'grad_norm': 2.0, 'lr': 5e-4,
             'val_eps_mse': float('nan'), 'val_min_ade': float('nan'),
             'elapsed_s': 1.5}]
    path = tmp_path / 'history.csv'
    save_history(rows, path)
    pd.testing.assert_frame_equal(load_history(path),
                                  pd.DataFrame(rows)[HISTORY_COLUMNS])


def _saved(model, tmp_path):
    path = tmp_path / 'stage1.ckpt'
    model.save(path)
    return path


@pytest.mark.slow
def test_stage1_loss_goes_down(synthetic_scenarios):
    settings = settings_from_dict(TINY)
    settings.train.epochs = 12
    settings.train.lr = 2e-3
    _, history = train_stage1(synthetic_scenarios, settings, progress=False)
    assert history['eps_mse'].iloc[-3:].mean() < \
        history['eps_mse'].iloc[:3].mean()


@pytest.mark.slow
def test_estimator_beats_few_step_ddim():
    from src.data.make_synthetic_dataset import generate_synthetic
    from src.evaluation.metrics import compute_metrics
    from src.models.predict_model import predict_all
    from src.settings import load_settings

    root = Path(__file__).resolve().parents[1]
    settings = load_settings(root / 'configs' / 'desk.toml')
    synthetic = settings.synthetic
    assert synthetic.train_count == 2000
    train = generate_synthetic(synthetic.train_count, 0, synthetic)
    val = generate_synthetic(synthetic.val_count, 1, synthetic)
    model, _ = train_stage1(train, settings, progress=False)
    model, _ = train_stage2(train, settings, model, progress=False)
    gamma = settings.inference.gamma
    ours = compute_metrics(predict_all(val, model, steps=gamma), val)
    ddim = compute_metrics(predict_all(val, model, method='ddim',
                                       steps=gamma), val)
    assert ours.min_ade < ddim.min_ade
