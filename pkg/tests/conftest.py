import numpy as np
import pytest

from jjsim.integrate import IntegratorConfig


@pytest.fixture
def tight():
    return IntegratorConfig(rtol=1e-11, atol=1e-11, dt_out=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
