import numpy as np
import pytest

from src.exceptions import CheckpointError, ConfigError
from src.models.forecaster import BACKBONE_PREFIXES, Forecaster


def test_parameters_live_under_module_prefixes(tiny_model):
    prefixes = {name.split('.')[0] for name in tiny_model.store}
    assert prefixes == {'encoder', 'denoiser', 'estimator', 'heads'}


def test_unknown_prior_is_rejected(tiny_settings):
    tiny_settings.model.prior = 'lstm'
    with pytest.raises(ConfigError):
        Forecaster(tiny_settings)


def test_same_seed_same_weights(tiny_settings):
    a = Forecaster(tiny_settings, seed=3)
    b = Forecaster(tiny_settings, seed=3)
    c = Forecaster(tiny_settings, seed=4)
    assert a.store.checksum() == b.store.checksum()
    assert a.store.checksum() != c.store.checksum()


def test_embed_shapes(tiny_model, scenario):
    features = tiny_model.featurize(scenario)
    emb, cond = tiny_model.embed(features)
    assert emb.d_local.shape == (3, 16)
    assert emb.d_global.shape == (3, 16)
    assert cond.shape == (3, 16)


def test_train_only_freezes_everything_else(tiny_model):
    tiny_model.train_only('estimator.', 'heads.')
    frozen = set(tiny_model.store.frozen_names())
    for name in tiny_model.store:
        assert (name in frozen) == name.startswith(BACKBONE_PREFIXES)


def test_save_and_load_round_trip(tmp_path, tiny_model):
    path = tmp_path / 'model.ckpt'
    tiny_model.save(path, stage=2)
    loaded = Forecaster.load(path)
    assert loaded.stage == 2
    assert loaded.settings.to_dict() == tiny_model.settings.to_dict()
    for name, param in tiny_model.store.items():
        np.testing.assert_allclose(loaded.store[name].values, param.values,
                                   rtol=1e-6, atol=1e-7)


def test_load_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError, match='not found'):
        Forecaster.load(tmp_path / 'absent.ckpt')


def test_with_prior_keeps_backbone(tiny_model):
    tiny_model.stage = 2
    swapped = tiny_model.with_prior('mlp')
    assert swapped.prior_prefix == 'mlp_prior.'
    assert swapped.stage == 1
    assert tiny_model.settings.model.prior == 'estimator'
    for prefix in BACKBONE_PREFIXES:
        assert swapped.store.checksum(prefix) == \
            tiny_model.store.checksum(prefix)


def test_from_stage1_ignores_the_saved_prior(tmp_path, tiny_model):
    path = tmp_path / 'stage1.ckpt'
    tiny_model.save(path, stage=1)
    model = Forecaster.from_stage1(path, 'mlp')
    assert model.stage == 1
    assert model.store.num_parameters('estimator.') == 0
    enc = tiny_model.store['encoder.aggregate.weight'].values
    np.testing.assert_allclose(
        model.store['encoder.aggregate.weight'].values, enc, rtol=1e-6,
        atol=1e-7)
