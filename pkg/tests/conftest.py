import os

import numpy as np
import pytest

from lfdseg import runtime

FIXTURES_DIR = os.path.join(os.path.dirname(__file__), "..", "fixtures", "golden")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def single_thread_default():
    """Every test starts and ends at 1 worker thread."""
    runtime.set_threads(1)
    yield
    runtime.set_threads(1)


@pytest.fixture
def golden_dir():
    if not os.path.isdir(FIXTURES_DIR):
        pytest.fail(f"golden fixtures missing at {FIXTURES_DIR}")
    return FIXTURES_DIR
