"""Shared fixtures: kernels, solved waves, and the reference front runs.

The expensive simulations are session-scoped and shared between the module
tests and the acceptance suite.
"""

import pytest

from nfl.evolution import evolve, make_initial
from nfl.fronts import extract_trace, fit_propagation_bounds
from nfl.kernels import Kernel
from nfl.reactions import Heterogeneous, Homogeneous, Modulation
from nfl.waves import solve_wave, solve_wave_kpp


@pytest.fixture(scope="session")
def gauss():
    return Kernel.gaussian(1.0)


@pytest.fixture(scope="session")
def bump():
    return Kernel.bump(1.0)


@pytest.fixture(scope="session")
def bistable_nl():
    return Homogeneous.bistable(0.25)


@pytest.fixture(scope="session")
def ignition_nl():
    return Homogeneous.ignition(0.3, 4.0)


@pytest.fixture(scope="session")
def ignition_sandwich():
    return Heterogeneous(Homogeneous.ignition(0.3, 4.0),
                         Homogeneous.ignition(0.25, 5.0),
                         Modulation(amp=1.0, omega_t=0.7, omega_x=0.9))


@pytest.fixture(scope="session")
def bistable_wave(bistable_nl, gauss):
    return solve_wave(bistable_nl, gauss)


@pytest.fixture(scope="session")
def ignition_wave(ignition_nl, gauss):
    return solve_wave(ignition_nl, gauss)


@pytest.fixture(scope="session")
def kpp_wave(gauss):
    return solve_wave_kpp(Homogeneous.kpp(), gauss, 0.5)


@pytest.fixture(scope="session")
def het_run(ignition_sandwich, gauss):
    """Static-window heterogeneous ignition run for the regularity checks."""
    dx = 0.05
    n = 2 * int(60 / dx) + 1
    u0 = make_initial("smoothed_step", -35.0, dx, n, center=-25.0, width=1.0)
    traj = evolve(u0, 60.0, 0.05, ignition_sandwich, gauss, snapshot_stride=1)
    trace = extract_trace(traj.snapshots[::8], [0.2, 0.5, 0.8])
    keep = trace.times >= 10.0
    fit = fit_propagation_bounds(trace.times[keep], trace.reference[keep])
    return {"traj": traj, "trace": trace, "fit": fit,
            "nl": ignition_sandwich, "kernel": gauss}


@pytest.fixture(scope="session")
def env_run(ignition_sandwich, gauss):
    """Longer heterogeneous run whose front trace feeds the envelope."""
    dx = 0.1
    n = 2 * int(80 / dx) + 1
    u0 = make_initial("smoothed_step", -70.0, dx, n, center=-45.0, width=1.0)
    traj = evolve(u0, 120.0, 0.05, ignition_sandwich, gauss, snapshot_stride=8)
    trace = extract_trace(traj.snapshots, [0.2, 0.5, 0.8])
    keep = trace.times >= 10.0
    times, ref = trace.times[keep], trace.reference[keep]
    fit = fit_propagation_bounds(times, ref)
    return {"traj": traj, "trace": trace, "times": times, "positions": ref,
            "fit": fit}


@pytest.fixture(scope="session")
def kpp_run(gauss):
    """Static-window kpp front from exponential seed data (rate 0.5)."""
    nl = Homogeneous.kpp()
    rate = 0.5
    dx = 0.1
    left, right = -45.0, 2.27 * 40.0 + 30.0 + 15.0
    n = int(round((right - left) / dx)) + 1
    u0 = make_initial("exponential_front", left, dx, n, rate=rate)
    traj = evolve(u0, 40.0, 0.05, nl, gauss, snapshot_stride=8)
    return {"traj": traj, "nl": nl, "kernel": gauss, "rate": rate}
