import numpy as np
import pytest

from magnls.groundstate import solve_ground_state


@pytest.fixture(scope="session")
def sech_profile():
    """1D cubic ground state, analytically sqrt(2) sech(x)."""
    return solve_ground_state(1, 3, tol=1e-10)


@pytest.fixture(scope="session")
def profile_2d():
    """2D cubic ground state (frozen oracle: U(0) = 2.206200864661)."""
    return solve_ground_state(2, 3, tol=1e-10)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
