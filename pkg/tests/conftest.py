import numpy as np
import pytest
from hypothesis import settings

from sluicepump.sluice import PumpSchedule, SluiceParams

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def params():
    return SluiceParams.defaults()


@pytest.fixture
def schedule(params):
    return PumpSchedule.default(params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
