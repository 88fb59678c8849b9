import pytest

from nnlif.model import Grid1D, ModelParams, Profile, make_initial_density


@pytest.fixture
def grid400():
    return Grid1D.to_threshold(-8.0, 400)


@pytest.fixture
def gaussian(grid400):
    return make_initial_density(Profile("gaussian", center=-2.0, width=0.5), grid400)


@pytest.fixture
def linear_params():
    return ModelParams(0.0, 0.0, -1.0)


@pytest.fixture
def inhibitory_params():
    return ModelParams(-1.0, -1.0, -1.0)
