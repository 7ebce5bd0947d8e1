import numpy as np
import pytest

from kflab.fano_p1 import make_profile, random_profile


@pytest.fixture(scope="session")
def fs():
    return make_profile()


@pytest.fixture(scope="session")
def sech2_05():
    return make_profile(spec={"kind": "sech2", "a": 0.5})


@pytest.fixture(scope="session")
def translated_fs():
    return make_profile(spec={"kind": "translated_fs", "a": 0.5})


@pytest.fixture(scope="session")
def random_profiles():
    return [random_profile(seed) for seed in range(20)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
