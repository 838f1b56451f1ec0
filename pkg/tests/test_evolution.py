import math

import numpy as np
import pytest

from nfl.evolution import (InputsNotOrderedError, check_comparison, evolve,
                           make_initial, read_trajectory, step,
                           write_trajectory)
from nfl.fields import FieldState
from nfl.fronts import extract_trace
from nfl.reactions import Homogeneous


def _const(value, n=401, dx=0.1, x0=-20.0):
    return FieldState(x0, dx, np.full(n, value), value, value)


@pytest.mark.parametrize("value", [0.0, 1.0, 0.25])
def test_equilibria_are_fixed_points(value, gauss, bistable_nl):
    state = _const(value)
    out = step(state, 0.05, bistable_nl, gauss)
    assert np.abs(out.values - value).max() <= 1e-12
    assert abs(out.u_left - value) <= 1e-12


def test_zero_field_stays_zero_under_evolve(gauss, ignition_nl):
    traj = evolve(_const(0.0), 2.0, 0.1, ignition_nl, gauss)
    assert max(float(s.values.max()) for s in traj.snapshots) == 0.0


def test_dt_cap_enforced(gauss, bistable_nl):
    with pytest.raises(ValueError, match="stability"):
        step(_const(0.5, n=401), 0.3, bistable_nl, gauss)


def test_plateau_ramp_values():
    state = make_initial("plateau_ramp", -10.0, 0.1, 201, level=0.8,
                         ramp_start=-2.0)
    assert state.sample(-3.0) == 0.8
    assert state.sample(1.0) == 0.0
    assert state.u_left == 0.8 and state.u_right == 0.0


def test_exponential_front_values():
    state = make_initial("exponential_front", -30.0, 0.1, 601, rate=1.0)
    assert state.sample(2.0) == pytest.approx(math.exp(-2.0), rel=1e-12)
    assert state.sample(-1.0) == 1.0


def test_smoothed_step_is_nonincreasing():
    state = make_initial("smoothed_step", -30.0, 0.1, 601, width=1.0)
    assert np.all(np.diff(state.values) <= 0.0)


def test_ramp_profiles_match_piecewise_definitions():
    down = make_initial("ramp_down", -10.0, 0.1, 201, level=0.7, x_star=2.0)
    assert down.sample(-3.0) == 0.7
    assert down.sample(-1.0) == pytest.approx(0.35, rel=1e-12)
    up = make_initial("ramp_up", -10.0, 0.1, 201, level=0.1, x_star=2.0)
    assert up.sample(-1.0) == 1.0
    assert up.sample(3.0) == pytest.approx(0.1, rel=1e-12)


def test_rk4_refinement_order(gauss, bistable_nl):
    # smooth data strictly inside (0,1): no clamping, clean order measurement
    def final(dt):
        state = make_initial("smoothed_step", -20.0, 0.1, 401, width=2.0)
        state = state.with_values(0.1 + 0.8 * state.values,
                                  u_left=0.9, u_right=0.1)
        return evolve(state, 2.0, dt, bistable_nl, gauss).snapshots[-1].values

    d1 = np.abs(final(0.2) - final(0.1)).max()
    d2 = np.abs(final(0.1) - final(0.05)).max()
    assert math.log2(d1 / d2) >= 3.5


def test_range_preservation_along_front(gauss, ignition_nl):
    u0 = make_initial("smoothed_step", -40.0, 0.1, 801, width=1.0)
    traj = evolve(u0, 20.0, 0.05, ignition_nl, gauss, recenter_level=0.5)
    lo = min(float(s.values.min()) for s in traj.snapshots)
    hi = max(float(s.values.max()) for s in traj.snapshots)
    assert lo >= -1e-6 and hi <= 1.0 + 1e-6


def test_monotone_data_stays_monotone(gauss, bistable_nl):
    u0 = make_initial("smoothed_step", -40.0, 0.1, 801, width=1.0)
    traj = evolve(u0, 10.0, 0.05, bistable_nl, gauss)
    for snap in traj.snapshots[::20]:
        assert np.all(np.diff(snap.values) <= 1e-8)


def test_evolution_is_deterministic(gauss, ignition_nl):
    u0 = make_initial("smoothed_step", -30.0, 0.1, 601, width=1.0)
    a = evolve(u0, 5.0, 0.05, ignition_nl, gauss, recenter_level=0.5)
    b = evolve(u0, 5.0, 0.05, ignition_nl, gauss, recenter_level=0.5)
    for sa, sb in zip(a.snapshots, b.snapshots):
        assert np.array_equal(sa.values, sb.values)
        assert sa.x0 == sb.x0
    assert a.shifts == b.shifts


def test_shift_transparency_of_interface_locations(gauss, ignition_nl):
    # a pure window shift must not move any interface location
    from nfl.fronts import interface_locations
    state = make_initial("smoothed_step", -20.0, 0.1, 401, width=1.0)
    for cells in (7, -13):
        shifted = state.shifted(cells)
        for lam in (0.2, 0.5, 0.8):
            assert interface_locations(shifted, lam) == \
                interface_locations(state, lam)


def test_recentering_keeps_absolute_positions(gauss, ignition_nl):
    # moderate recentering window agrees with a wide fixed window up to the
    # (exponentially small) window-truncation error
    u0n = make_initial("smoothed_step", -25.0, 0.1, 501, width=1.0)
    u0w = make_initial("smoothed_step", -60.0, 0.1, 1201, width=1.0)
    narrow = evolve(u0n, 30.0, 0.05, ignition_nl, gauss, recenter_level=0.5,
                    recenter_threshold=0.1, snapshot_stride=40)
    wide = evolve(u0w, 30.0, 0.05, ignition_nl, gauss, snapshot_stride=40)
    assert narrow.shifts, "narrow window should have recentered"
    tn = extract_trace(narrow.snapshots, [0.5])
    tw = extract_trace(wide.snapshots, [0.5])
    assert np.abs(tn.reference - tw.reference).max() <= 1e-6


def test_window_doubling_changes_nothing_measurable(gauss, ignition_nl):
    def speed(half_width):
        n = 2 * int(half_width / 0.1) + 1
        u0 = make_initial("smoothed_step", -half_width, 0.1, n, width=1.0)
        traj = evolve(u0, 30.0, 0.05, ignition_nl, gauss, snapshot_stride=20)
        tr = extract_trace(traj.snapshots, [0.5])
        half = tr.times > 15.0
        return float(np.polyfit(tr.times[half], tr.reference[half], 1)[0])

    assert abs(speed(40.0) - speed(80.0)) < 1e-6


def test_comparison_equal_inputs(gauss, bistable_nl):
    u0 = make_initial("smoothed_step", -30.0, 0.1, 601, width=1.0)
    report = check_comparison(u0, u0, 2.0, 0.05, bistable_nl, gauss)
    assert report["max_violation"] == 0.0


def test_comparison_scaled_pair(gauss, bistable_nl):
    v0 = make_initial("smoothed_step", -30.0, 0.1, 601, width=1.0)
    u0 = v0.with_values(0.9 * v0.values, u_left=0.9, u_right=0.0)
    report = check_comparison(u0, v0, 10.0, 0.05, bistable_nl, gauss)
    assert report["passed"], report


def test_comparison_under_sandwiched_terms(gauss):
    # lower solution under the lower member, upper under the upper member
    lower = Homogeneous.ignition(0.3, 4.0)
    upper = Homogeneous.ignition(0.25, 5.0)
    u0 = make_initial("smoothed_step", -30.0, 0.1, 601, width=1.0)
    report = check_comparison(u0, u0, 10.0, 0.05, lower, gauss,
                              nl_upper=upper)
    assert report["passed"], report


def test_comparison_rejects_unordered_inputs(gauss, bistable_nl):
    v0 = make_initial("smoothed_step", -30.0, 0.1, 601, width=1.0)
    u0 = v0.with_values(np.clip(v0.values + 0.05, 0, 1))
    with pytest.raises(InputsNotOrderedError):
        check_comparison(u0, v0, 1.0, 0.05, bistable_nl, gauss)


def test_trajectory_roundtrip(tmp_path, gauss, bistable_nl):
    u0 = make_initial("smoothed_step", -15.0, 0.1, 301, width=1.0)
    traj = evolve(u0, 1.0, 0.05, bistable_nl, gauss, recenter_level=0.5,
                  snapshot_stride=5)
    write_trajectory(traj, tmp_path / "run")
    back = read_trajectory(tmp_path / "run")
    assert back.dt == traj.dt
    assert back.shifts == traj.shifts
    for sa, sb in zip(traj.snapshots, back.snapshots):
        assert np.array_equal(sa.values, sb.values)
        assert sa.x0 == sb.x0 and sa.time == sb.time


def test_comparison_holds_under_bump_kernel(bump, bistable_nl):
    v0 = make_initial("smoothed_step", -30.0, 0.1, 601, width=1.0)
    u0 = v0.with_values(0.85 * v0.values, u_left=0.85, u_right=0.0)
    report = check_comparison(u0, v0, 5.0, 0.05, bistable_nl, bump)
    assert report["passed"], report
