"""Shared fixtures and the --runslow switch."""

import numpy as np
import pytest

from config.settings import TestingSettings
from data.container import BiasedDataset
from data.gaussian import make_gaussian_toy
from debias.topology import CorrelationTopology


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run desk-scale reproduction tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def testing_environment(monkeypatch):
    monkeypatch.setenv('LC_ENVIRONMENT', 'testing')
    monkeypatch.delenv('SENTRY_DSN', raising=False)


@pytest.fixture
def settings():
    return TestingSettings


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_gauss() -> BiasedDataset:
    """Two-class toy small enough for a full training run in a test."""
    return make_gaussian_toy(ratio=0.05, seed=3, n_train=400, test_per_group=20)


@pytest.fixture
def tiny_m2o() -> BiasedDataset:
    """Three labels where labels 0 and 1 share attribute 0."""
    rng = np.random.default_rng(5)
    topology = CorrelationTopology.many_to_one([0, 0, 1])
    y_train = np.resize(np.arange(3), 120)
    a_train = np.asarray(topology.label_to_attr)[y_train].copy()
    a_train[:6] = 1 - a_train[:6]
    y_test = np.repeat(np.arange(3), 8)
    a_test = np.tile(np.repeat(np.arange(2), 4), 3)
    return BiasedDataset(
        x_train=rng.standard_normal((120, 6)).astype(np.float32),
        y_train=y_train,
        a_train_hidden=a_train,
        x_test=rng.standard_normal((24, 6)).astype(np.float32),
        y_test=y_test,
        a_test=a_test,
        topology=topology,
        minority_ratio=0.05,
        name='tiny-m2o',
    )


@pytest.fixture
def run_dir(tmp_path):
    path = tmp_path / 'run'
    path.mkdir()
    return path
