import pytest

from skewlab.family import BiquadParams, construct_example
from skewlab.julia import base_julia_sample


@pytest.fixture(scope="session")
def example_2():
    """f_2 with a coarse base sample, shared by the slower tests."""
    return construct_example(2, julia_depth=5)


@pytest.fixture(scope="session")
def chebyshev_params():
    return BiquadParams(a=-2.0, b=-2.0)


@pytest.fixture(scope="session")
def chebyshev_julia(chebyshev_params):
    return base_julia_sample(chebyshev_params.poly(), depth=6)
