import json

import numpy as np
import pytest

from nfl.envelope import (BoundsCertificateMissingError, EnvelopeParams,
                          SmoothInterface, continuous_modification,
                          smooth_modification, verify_envelope)
from nfl.fronts import fit_propagation_bounds
from nfl.hermite import eval_poly, eval_poly_d1, rise_blend_coeffs


def _params(**kw):
    base = dict(lower_speed=1.0, lower_lag=0.5, upper_speed=2.0,
                upper_lag=0.25, step_offset=2.0, blend_width=0.3)
    base.update(kw)
    return EnvelopeParams(**base)


def test_params_reject_small_offset():
    with pytest.raises(ValueError, match="step_offset"):
        _params(step_offset=0.4)  # upper_speed*upper_lag = 0.5


def test_params_reject_wide_blend():
    p = _params()
    with pytest.raises(ValueError, match="blend_width"):
        _params(blend_width=0.51 * p.min_gap)


def test_blend_against_dense_hermite_solver():
    # oracle: solve the 6x6 Hermite system for the blend coefficients
    slope, width, rise = 0.5, 1.0, 2.0
    coeffs = rise_blend_coeffs(slope, rise, width)
    rows, rhs = [], []
    for s, order, val in [(-width, 0, -slope * width), (0.0, 0, rise),
                          (-width, 1, slope), (0.0, 1, slope),
                          (-width, 2, 0.0), (0.0, 2, 0.0)]:
        if order == 0:
            rows.append([s**k for k in range(6)])
        elif order == 1:
            rows.append([k * s**(k - 1) if k >= 1 else 0.0 for k in range(6)])
        else:
            rows.append([k * (k - 1) * s**(k - 2) if k >= 2 else 0.0
                         for k in range(6)])
        rhs.append(val)
    oracle = np.linalg.solve(np.asarray(rows), np.asarray(rhs))
    assert np.abs(coeffs - oracle).max() <= 1e-12
    # the six pinned conditions are reproduced
    assert eval_poly(coeffs, np.array([-width]))[0] == pytest.approx(
        -slope * width, abs=1e-12)
    assert eval_poly(coeffs, np.array([0.0]))[0] == pytest.approx(rise,
                                                                  abs=1e-12)
    assert eval_poly_d1(coeffs, np.array([-width, 0.0])) == pytest.approx(
        [slope, slope], abs=1e-12)


def test_blend_slope_never_below_chase_slope():
    coeffs = rise_blend_coeffs(0.5, 2.0, 1.0)
    s = np.linspace(-1.0, 0.0, 4001)
    assert eval_poly_d1(coeffs, s).min() >= 0.5 - 1e-12


def test_linear_trace_hit_gaps_closed_form():
    # chase slope 0.5 against slope-2 trace with offset 2: gap = 2/1.5
    t = np.linspace(0.0, 40.0, 4001)
    x = 2.0 * t
    params = _params(lower_lag=0.5, upper_lag=0.25)
    env = smooth_modification(t, x, params)
    gaps = np.diff(env.knots[1:])
    assert np.abs(gaps - 2.0 / 1.5).max() <= 1e-9
    report = verify_envelope(env, t, x)
    assert report["passed"], report
    assert report["sup_deviation"] == pytest.approx(2.0, rel=0.02)
    assert report["deviation_sign_min"] >= -1e-12


def test_envelope_certificate_on_wobbly_trace():
    t = np.linspace(0.0, 60.0, 6001)
    x = 1.5 * t + 0.8 * np.sin(1.3 * t)
    fit = fit_propagation_bounds(t, x)
    params = EnvelopeParams.from_fit(fit)
    env = smooth_modification(t, x, params)
    report = verify_envelope(env, t, x)
    assert report["passed"], report
    assert report["knot_mismatch"] <= 1e-10
    assert report["derivative_min"] >= params.slope_min - 1e-9
    assert report["derivative_max"] <= params.slope_max + 1e-9


def test_pairwise_monotonicity_of_envelope():
    t = np.linspace(0.0, 60.0, 2001)
    x = 1.5 * t + 0.8 * np.sin(1.3 * t)
    fit = fit_propagation_bounds(t, x)
    params = EnvelopeParams.from_fit(fit)
    env = smooth_modification(t, x, params)
    lo, hi = env.domain
    dense = np.linspace(lo, hi, 800)
    vals = env.value(dense)
    dv = vals[None, :] - vals[:, None]
    dt = dense[None, :] - dense[:, None]
    future = dt > 0
    assert np.all(dv[future] >= params.slope_min * dt[future] - 1e-9)


def test_broken_blend_fails_knot_check():
    t = np.linspace(0.0, 40.0, 2001)
    env = smooth_modification(t, 2.0 * t, _params())
    assert env.knot_mismatch() <= 1e-10
    env.blend_coeffs = env.blend_coeffs.copy()
    env.blend_coeffs[3] += 1e-3
    assert env.knot_mismatch() > 1e-10


def test_step1_requires_certificate():
    t = np.linspace(0.0, 10.0, 101)
    with pytest.raises(BoundsCertificateMissingError):
        continuous_modification(t, 2.0 * t, _params(), fit=None)


def test_step1_smooths_a_jump_within_bound():
    t = np.linspace(0.0, 40.0, 2001)
    x = 2.0 * t + np.where(t > 20.0, 0.4, 0.0)
    fit = fit_propagation_bounds(t, x)
    params = EnvelopeParams.from_fit(fit)
    cont = continuous_modification(t, x, params, fit)
    assert cont["sup_forward"] <= cont["deviation_bound"]
    assert cont["sup_backward"] <= cont["deviation_bound"]
    # continuity at sample resolution: increments bounded by the blend slope
    dt = t[1] - t[0]
    max_rate = params.chase_slope + 1.875 * cont["deviation_bound"] \
        / min(params.blend_width, params.lead_time)
    assert np.abs(np.diff(cont["forward"])).max() <= max_rate * dt * 1.05


def test_step1_near_idempotent_on_continuous_trace():
    t = np.linspace(0.0, 40.0, 2001)
    x = 2.0 * t
    fit = fit_propagation_bounds(t, x)
    params = EnvelopeParams.from_fit(fit)
    cont = continuous_modification(t, x, params, fit)
    # output rides a fixed offset above the trace, up to the knot pattern;
    # the knot smoothing may dip below by at most one sample overshoot
    offset = params.upper_speed * (params.lead_time + params.upper_lag)
    dev = cont["forward"] - x
    dt = t[1] - t[0]
    assert dev.min() >= -(params.upper_speed * (params.upper_lag + dt) + 1e-9)
    assert dev.max() <= offset + params.lower_speed * params.lower_lag + 1e-9
    assert np.abs(dev).max() <= cont["deviation_bound"]


def test_start_point_insensitivity_on_jumpy_trace():
    rng = np.random.default_rng(7)
    t = np.arange(0.0, 200.0, 0.1)
    jumps = np.zeros_like(t)
    pos, val = 5.0, 0.0
    while pos < 195.0:
        val += rng.uniform(0.8, 2.0)
        jumps[t >= pos] = val
        pos += rng.uniform(2.0, 4.0)
    x = 0.3 * t + 0.5 * jumps
    fit = fit_propagation_bounds(t, x)
    params = EnvelopeParams.from_fit(fit)
    cont = continuous_modification(t, x, params, fit)
    refit = fit_propagation_bounds(t, cont["forward"])
    params2 = EnvelopeParams.from_fit(refit)
    e1 = smooth_modification(t, cont["forward"], params2)
    i2 = int(np.argmin(np.abs(t - (t[0] + 5.0 * params2.max_gap))))
    e2 = smooth_modification(t[i2:], cont["forward"][i2:], params2)
    start = e2.knots[0] + 3.0 * params2.max_gap
    dense = np.linspace(start, min(e1.domain[1], e2.domain[1]), 2000)
    diff = np.abs(e1.value(dense) - e2.value(dense)).max()
    one_blend_span = params2.step_offset \
        + params2.chase_slope * params2.blend_width
    assert diff <= one_blend_span


def test_smooth_interface_roundtrip():
    t = np.linspace(0.0, 40.0, 2001)
    env = smooth_modification(t, 2.0 * t, _params())
    back = SmoothInterface.from_json(env.to_json())
    dense = np.linspace(*env.domain, 500)
    assert np.array_equal(back.value(dense), env.value(dense))
    assert np.array_equal(back.derivative(dense), env.derivative(dense))


def test_envelope_json_is_valid(env_run):
    fit = env_run["fit"]
    params = EnvelopeParams.from_fit(fit)
    cont = continuous_modification(env_run["times"], env_run["positions"],
                                   params, fit)
    refit = fit_propagation_bounds(env_run["times"], cont["forward"])
    params2 = EnvelopeParams.from_fit(refit)
    env = smooth_modification(env_run["times"], cont["forward"], params2)
    payload = json.loads(env.to_json())
    assert set(payload) == {"params", "knots", "anchors", "t_end",
                            "blend_coeffs"}
