import numpy as np
import pytest

from conveyorsim import TrapConfig, derive_trap_params

KB = 1.380649e-23


@pytest.fixture
def trap_1mk():
    """Deep trap: U0 = 1 mK, T tuned for T2* = 0.86 ms."""
    return TrapConfig(depth_U0=1e-3 * KB, temperature_T=2.0653e-4)


@pytest.fixture
def trap_01mk():
    """Transport trap: U0 = 0.1 mK, mean energy 0.3 U0."""
    return TrapConfig(depth_U0=0.1e-3 * KB, temperature_T=0.02e-3)


@pytest.fixture
def params_1mk(trap_1mk):
    return derive_trap_params(trap_1mk)


@pytest.fixture
def params_01mk(trap_01mk):
    return derive_trap_params(trap_01mk)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
