import pytest

from src.data.make_synthetic_dataset import generate_synthetic
from src.models.forecaster import Forecaster
from src.settings import SyntheticConfig, settings_from_dict

from tests.helpers import TINY, two_lane_scenario


@pytest.fixture
def tiny_settings():
    return settings_from_dict(TINY)


@pytest.fixture
def tiny_model(tiny_settings):
    return Forecaster(tiny_settings, seed=0, dtype='float64')


@pytest.fixture
def scenario():
    return two_lane_scenario()


@pytest.fixture(scope='session')
def synthetic_scenarios():
    return generate_synthetic(4, 11, SyntheticConfig(max_agents=3))
