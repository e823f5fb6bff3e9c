from pathlib import Path

import pytest

from src.exceptions import ConfigError
from src.settings import load_settings, settings_from_dict

CONFIGS = Path(__file__).resolve().parents[1] / 'configs'


@pytest.mark.parametrize('name', ['default.toml', 'desk.toml'])
def test_shipped_configs_load(name):
    settings = load_settings(CONFIGS / name)
    assert settings.scene.radius == 50.0


def test_desk_config_trains_on_two_thousand_scenarios():
    settings = load_settings(CONFIGS / 'desk.toml')
    assert settings.synthetic.train_count == 2000
    assert settings.synthetic.val_count == 400


@pytest.mark.parametrize('key', ['history_steps', 'future_steps',
                                 'sample_rate_hz'])
def test_window_lengths_are_not_configurable(key):
    with pytest.raises(ConfigError, match=key):
        settings_from_dict({'scene': {key: 20}})


def test_unknown_table_is_rejected():
    with pytest.raises(ConfigError):
        settings_from_dict({'decoder': {}})
