import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def backblaze_fixture():
    return os.path.join(DATA_DIR, "backblaze_synthetic")


def cmapss_dir():
    """Directory with the C-MAPSS text files, from $CMAPSS_DIR, or None."""
    path = os.environ.get("CMAPSS_DIR")
    if path and os.path.isfile(os.path.join(path, "train_FD001.txt")):
        return path
    return None
