import math

import pytest

from zeno_metrology import NoiseSpec, ProbeSpec
from zeno_metrology.dynamics import solve_c, solve_sensitivity

FIG1_PROBE = ProbeSpec(1.0, math.pi)


def fig1_noise(omega_c=300.0, eta=0.02, s=1.0):
    return NoiseSpec(eta, omega_c, s)


_cache = {}


def cached_solve(omega_c, t_max=100.0, h=None, sensitivity=False, eta=0.02):
    key = (omega_c, t_max, h, sensitivity, eta)
    if key not in _cache:
        solver = solve_sensitivity if sensitivity else solve_c
        _cache[key] = solver(FIG1_PROBE, fig1_noise(omega_c, eta), t_max, h)
    return _cache[key]


@pytest.fixture(scope="session")
def fig1_sensitivity_300():
    return cached_solve(300.0, sensitivity=True)
