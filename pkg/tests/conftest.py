import numpy as np
import pytest

from pivot.datagen import SampleSet, ToySpec, generate_toy
from pivot.train import TrainConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run the long reproduction tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long reproduction run")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def toy_data():
    return generate_toy(ToySpec(n=2000, seed=3))


@pytest.fixture
def blobs():
    """Two well separated gaussian blobs with a nuisance unrelated to x."""
    rng = np.random.default_rng(11)
    n = 1000
    y = rng.integers(0, 2, size=n)
    x = rng.normal(0.0, 0.5, size=(n, 2)) + np.where(y[:, None] == 1, 3.0, -3.0)
    z = rng.standard_normal(n)
    return SampleSet(x, y, z)


@pytest.fixture
def quick_config():
    return TrainConfig(lam=10.0, minibatch_size=32, adversary_steps=3,
                       iterations=6, pretrain_epochs=2, checkpoint_every=2,
                       snapshot_every=3, seed=5)
