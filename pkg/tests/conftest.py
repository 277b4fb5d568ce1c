import time

import pytest

from qdsim.dataset import sweep_map
from qdsim.device import mean_device


class TimedMap:
    def __init__(self, device_map, elapsed):
        self.map = device_map
        self.elapsed = elapsed


@pytest.fixture(scope="session")
def mean_dev():
    return mean_device()


@pytest.fixture(scope="session")
def small_map(mean_dev):
    """30x30 sweep of the mean device; cheap shared input for unit tests."""
    return sweep_map(mean_dev, grid_size=30)


@pytest.fixture(scope="session")
def full_map(mean_dev):
    """Full-resolution 100x100 sweep with its wall-clock time."""
    start = time.perf_counter()
    device_map = sweep_map(mean_dev, grid_size=100, workers=2)
    return TimedMap(device_map, time.perf_counter() - start)
