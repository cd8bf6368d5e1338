import math
import warnings
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from conftest import FIG1_PROBE, cached_solve, fig1_noise
from zeno_metrology import dynamics
from zeno_metrology.dynamics import (
    MarkovianParams,
    SolverDivergence,
    asymptotic_c,
    default_step,
    markovian_c,
    markovian_params,
    plateau,
    solve_c,
    solve_sensitivity,
)
from zeno_metrology.spectral import NoiseSpec, ProbeSpec
from zeno_metrology.spectrum import find_bound_state

WEAK = NoiseSpec(0.001, 20.0, 1.0)


@pytest.mark.parametrize("probe", [ProbeSpec(1.0, math.pi), ProbeSpec(2.0, -0.5)])
def test_noiseless_evolution_is_exact(probe):
    traj = solve_sensitivity(probe, NoiseSpec(0.0, 300.0), 50.0, 0.01)
    exact = np.exp(-1j * probe.frequency * traj.times)
    assert traj.c[0] == 1.0
    assert np.max(np.abs(traj.c - exact)) < 1e-10
    assert np.max(np.abs(traj.dc_dgamma + 1j * traj.times * exact)) < 1e-8
    assert traj.dc_dgamma[0] == 0


def test_default_step():
    assert default_step(FIG1_PROBE, fig1_noise(300.0)) == pytest.approx(0.2 / 300)
    assert default_step(FIG1_PROBE, NoiseSpec(0.02, 5.0)) == pytest.approx(0.02)


def test_trajectory_is_read_only():
    traj = solve_c(FIG1_PROBE, NoiseSpec(0.02, 50.0), 1.0)
    with pytest.raises(ValueError):
        traj.c[1] = 0
    assert traj.t_max == pytest.approx(1.0)
    assert traj.c[0] == 1.0 + 0j


def test_under_resolved_step_warns():
    with pytest.warns(RuntimeWarning):
        solve_c(FIG1_PROBE, fig1_noise(300.0), 0.5, 0.01)


def test_divergence_names_the_step(monkeypatch):
    def broken(noise, h, n):
        P = np.full(n, np.nan + 0j)
        return P, P

    monkeypatch.setattr(dynamics, "kernel_interval_weights", broken)
    with pytest.raises(SolverDivergence) as err, np.errstate(invalid="ignore"):
        solve_c(FIG1_PROBE, fig1_noise(300.0), 0.1)
    assert err.value.step == 1


def test_invalid_grid():
    with pytest.raises(ValueError):
        solve_c(FIG1_PROBE, WEAK, -1.0)
    with pytest.raises(ValueError):
        solve_c(FIG1_PROBE, WEAK, 1.0, 0.0)


@pytest.mark.parametrize(
    "noise",
    [fig1_noise(150.0), NoiseSpec(0.3, 10.0, 0.5), NoiseSpec(0.05, 40.0, 2.0), NoiseSpec(0.5, 30.0, 1.0)],
)
def test_contraction(noise):
    traj = solve_c(FIG1_PROBE, noise, 30.0)
    assert np.all(np.abs(traj.c) <= 1.0 + 1e-6)


def test_bound_state_plateau():
    traj = cached_solve(300.0)
    bound = find_bound_state(FIG1_PROBE, fig1_noise(300.0))
    mean, std = plateau(traj)
    assert abs(mean / bound.Z - 1) < 0.02
    assert std < 0.01
    assert np.all(np.abs(traj.c) <= 1.0 + 1e-6)


def test_decay_without_bound_state():
    traj = cached_solve(100.0)
    assert abs(traj.c[-1]) < 0.02
    assert plateau(traj)[0] < 0.05


def test_long_time_asymptote():
    traj = cached_solve(300.0)
    bound = find_bound_state(FIG1_PROBE, fig1_noise(300.0))
    late = traj.times >= 80.0
    ratio = traj.c[late] / asymptotic_c(bound, traj.times[late])
    assert np.max(np.abs(np.abs(ratio) - 1)) < 0.02
    assert np.max(np.abs(np.angle(ratio))) < 0.1


def test_sensitivity_matches_finite_differences():
    noise, step = fig1_noise(300.0), 1e-4
    traj = solve_sensitivity(FIG1_PROBE, noise, 20.0)
    up = solve_c(replace(FIG1_PROBE, gamma=math.pi + step), noise, 20.0)
    down = solve_c(replace(FIG1_PROBE, gamma=math.pi - step), noise, 20.0)
    fd = (up.c - down.c) / (2 * step)
    idx = np.linspace(len(traj.times) // 10, len(traj.times) - 1, 10).astype(int)
    rel = np.abs(traj.dc_dgamma[idx] - fd[idx]) / np.abs(fd[idx])
    assert np.max(rel) < 1e-4


def test_phase_sensitivity_slope_is_residue(fig1_sensitivity_300):
    traj = fig1_sensitivity_300
    bound = find_bound_state(FIG1_PROBE, fig1_noise(300.0))
    late = traj.times >= 80.0
    slope = np.polyfit(traj.times[late], np.imag(traj.dc_dgamma[late] / traj.c[late]), 1)[0]
    assert abs(slope + bound.Z) < 1e-3 * bound.Z


def test_second_order_convergence():
    noise = NoiseSpec(0.1, 20.0, 1.0)
    h = 0.02
    ends = [abs(solve_c(FIG1_PROBE, noise, 5.0, h / 2**k).c[-1]) for k in range(3)]
    ratio = (ends[0] - ends[1]) / (ends[1] - ends[2])
    assert 3.5 <= ratio <= 4.5


def test_markovian_params_values():
    p = markovian_params(FIG1_PROBE, fig1_noise(300.0))
    assert math.isclose(p.kappa, 0.2566561530896773, rel_tol=1e-12)
    assert math.isclose(markovian_params(FIG1_PROBE, WEAK).kappa, 0.0105775165257924, rel_tol=1e-12)
    zero = markovian_params(FIG1_PROBE, NoiseSpec(0.0, 300.0))
    assert zero.kappa == 0 and zero.delta == 0


def test_markovian_closed_form():
    assert markovian_c(MarkovianParams(0.3, 0.1), FIG1_PROBE, 0.0) == 1
    # shift chosen to cancel the free rotation, leaving pure decay
    params = MarkovianParams(kappa=1.0, delta=-FIG1_PROBE.frequency)
    assert markovian_c(params, FIG1_PROBE, 1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    with pytest.raises(ValueError):
        markovian_c(params, FIG1_PROBE, -1.0)


def test_markovian_limit_of_exact_dynamics():
    params = markovian_params(FIG1_PROBE, WEAK)
    t_max = 2.0 / params.kappa
    traj = solve_c(FIG1_PROBE, WEAK, t_max)
    approx = np.abs(markovian_c(params, FIG1_PROBE, traj.times))
    assert np.max(np.abs(np.abs(traj.c) / approx - 1)) < 0.05


def test_asymptote_helpers():
    ideal = SimpleNamespace(Z=1.0, varpi_b=FIG1_PROBE.frequency)
    t = np.linspace(0, 10, 7)
    assert np.allclose(asymptotic_c(ideal, t), np.exp(-1j * FIG1_PROBE.frequency * t))
    bound = find_bound_state(FIG1_PROBE, fig1_noise(300.0))
    assert asymptotic_c(bound, 0.0) == pytest.approx(bound.Z)
    assert bound.Z < 1


def test_plateau_window():
    traj = solve_c(FIG1_PROBE, NoiseSpec(0.0, 10.0), 10.0, 0.1)
    mean, std = plateau(traj, 0.2)
    assert mean == pytest.approx(1.0) and std < 1e-12


def test_solver_is_deterministic():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = solve_sensitivity(FIG1_PROBE, NoiseSpec(0.3, 30.0), 4.0)
        b = solve_sensitivity(FIG1_PROBE, NoiseSpec(0.3, 30.0), 4.0)
    assert np.array_equal(a.c, b.c) and np.array_equal(a.dc_dgamma, b.dc_dgamma)
