import os

import hypothesis
import numpy as np
import pytest

np.seterr(all="warn")

hypothesis.settings.register_profile("dev", max_examples=20, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical oracle comparisons")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "runs"
