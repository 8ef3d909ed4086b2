import numpy as np
import pytest

from sgcontrol.builders import FieldBuilder
from sgcontrol.dynamics import IntegratorConfig
from sgcontrol.torus import SobolevParams, TorusGeometry


@pytest.fixture
def square() -> TorusGeometry:
    return TorusGeometry(1.0, 1.0)


@pytest.fixture
def skewed() -> TorusGeometry:
    return TorusGeometry(1.0, 1.3)


@pytest.fixture
def params() -> SobolevParams:
    return SobolevParams(alpha=1.0, nu=0.1)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def integrator(params) -> IntegratorConfig:
    return IntegratorConfig(params, dt=1e-2)


@pytest.fixture
def random_field(rng):
    """Factory of seeded random fields: random_field(geometry, trunc, max_order=None, amplitude=1.0)."""
    def make(geometry, trunc, max_order=None, amplitude=1.0):
        return FieldBuilder(geometry, trunc).random(rng, max_order, amplitude).finalize()
    return make
