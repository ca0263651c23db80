import numpy as np
import pytest

from st_deepkriging.nn_core import TrainConfig
from st_deepkriging.simulator import SimulationSpec, simulate


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run acceptance-scale tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: acceptance-scale test, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def quick_train():
    return TrainConfig(learning_rate=0.01, batch_size=16, epochs=30, seed=3, patience=30, log_every=0)


@pytest.fixture(scope='session')
def small_field():
    """ 16 stations x 12 times, nugget included. """
    return simulate(SimulationSpec(n_locations=16, n_times=12, seed=11))
