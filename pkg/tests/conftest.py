import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kinirl.grid_mdp import build_transition_kernels

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def kernels():
    return build_transition_kernels(gamma=0.95)


@pytest.fixture(scope="session")
def kernels_undiscounted():
    return build_transition_kernels(gamma=1.0)


def random_instance(rng, lo=6, hi=12, r_lo=-5.0, r_hi=0.0):
    h, w = (int(x) for x in rng.integers(lo, hi + 1, size=2))
    reward = rng.uniform(r_lo, r_hi, (h, w))
    goal = (int(rng.integers(h)), int(rng.integers(w)))
    start = (int(rng.integers(h)), int(rng.integers(w)), int(rng.integers(8)))
    return reward, goal, start
