import pytest

from bcslab.potential import RadialPotential


@pytest.fixture(scope="session")
def gauss5():
    return RadialPotential.gaussian(5.0, 1.0)
