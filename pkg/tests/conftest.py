import numpy as np
import pytest

from wasep.model import ModelSpec
from wasep.profiles import TimeWeight, make_function


def make_spec(
    n=64,
    drift=("constant", {"value": 0.0}),
    profile=("constant", {"value": 0.5}),
    weight=("constant", {"value": 1.0}),
    horizon=0.1,
    margin=0.05,
    validate=True,
):
    return ModelSpec(
        n=n,
        drift=make_function(*drift),
        profile=make_function(*profile),
        weight=TimeWeight(make_function(*weight), horizon),
        horizon=horizon,
        margin=margin,
        validate=validate,
    )


@pytest.fixture
def spec_equilibrium():
    return make_spec()


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(1234)))
