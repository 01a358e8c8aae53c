import math

import pytest

from tlsbath.model import ModelParams, QubitState, build_band_environment


@pytest.fixture(scope="session")
def resonant_params():
    return ModelParams(delta_s=1.0, detuning=0.0, coupling=0.05, dt=math.pi)


@pytest.fixture(scope="session")
def small_env():
    """Five-spin environment, cheap enough for dense checks."""
    return build_band_environment(5, 1.0, seed=901)


@pytest.fixture(scope="session")
def seven_env():
    return build_band_environment(7, 1.0, seed=20451)


@pytest.fixture(scope="session")
def ground():
    return QubitState(rho00=1.0)
