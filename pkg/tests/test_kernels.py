import math

import numpy as np
import pytest

from nfl.fields import FieldState, read_snapshot, write_snapshot
from nfl.kernels import (GridTooCoarseError, Kernel, convolve,
                         convolve_derivative_values, convolve_values,
                         validate_h1)

SQRT_2PI = math.sqrt(2.0 * math.pi)


def simpson(f, a, b, n):
    """Independent composite-Simpson oracle."""
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-2:2].sum())


def test_gaussian_density_closed_form(gauss):
    assert gauss.eval(0.0) == pytest.approx(1.0 / SQRT_2PI, rel=1e-14)


def test_symmetry_is_exact(gauss, bump):
    for k in (gauss, bump):
        x = np.linspace(0.0, k.trunc_radius, 501)
        assert np.array_equal(k.eval(x), k.eval(-x))


def test_bump_vanishes_outside_support(bump):
    assert bump.eval(1.5) == 0.0
    assert bump.eval(np.array([-2.0, 1.0001])).max() == 0.0


def test_derivative_closed_forms(gauss, bump):
    assert gauss.eval_derivative(0.0) == 0.0
    assert gauss.eval_derivative(1.0) == pytest.approx(
        -math.exp(-0.5) / SQRT_2PI, rel=1e-14)
    assert bump.eval_derivative(1.0) == 0.0
    assert bump.eval_derivative(-1.0) == 0.0


def test_derivative_antisymmetry(gauss, bump):
    x = np.linspace(0.1, 3.0, 40)
    for k in (gauss, bump):
        assert np.allclose(k.eval_derivative(-x), -k.eval_derivative(x),
                           atol=0.0)


def test_derivative_matches_central_differences_order_two(gauss, bump):
    for k in (gauss, bump):
        errs = []
        for h in (1e-2, 1e-3):
            x = np.linspace(-0.9 * k.trunc_radius, 0.9 * k.trunc_radius, 101)
            fd = (k.eval(x + h) - k.eval(x - h)) / (2.0 * h)
            errs.append(np.abs(fd - k.eval_derivative(x)).max())
        order = math.log10(errs[0] / errs[1])
        assert order >= 1.9


def test_exp_moment_unit_mass(gauss, bump):
    assert gauss.exp_moment(0.0) == pytest.approx(1.0, abs=1e-10)
    assert bump.exp_moment(0.0) == pytest.approx(1.0, abs=1e-10)


def test_exp_moment_gaussian_closed_form(gauss):
    assert gauss.exp_moment(1.0) == pytest.approx(math.exp(0.5), rel=1e-8)
    # moment of a width-sigma gaussian is exp(gamma^2 sigma^2 / 2)
    half = Kernel.gaussian(0.5)
    assert half.exp_moment(4.0) == pytest.approx(math.exp(2.0), rel=1e-8)


def test_exp_moment_bump_against_quadrature_oracle(bump):
    oracle = simpson(lambda x: bump.eval(x) * np.exp(0.5 * x), -1.0, 1.0, 20000)
    val = bump.exp_moment(0.5)
    assert 1.0 < val < math.exp(0.5)
    assert val == pytest.approx(oracle, abs=1e-8)


def test_exp_moment_symmetry(gauss, bump):
    for k in (gauss, bump):
        for g in (0.5, 1.0, 2.0):
            assert abs(k.exp_moment(g) - k.exp_moment(-g)) <= 1e-10


def test_heavy_tailed_family_rejected():
    with pytest.raises(ValueError, match="exponential moments"):
        Kernel("cauchy", 1.0)


def test_validate_h1_passes_for_both_families(gauss, bump):
    for k in (gauss, bump):
        report = validate_h1(k)
        assert report["passed"], report


def test_validate_h1_flags_unnormalized_mass():
    report = validate_h1(Kernel.bump(1.0, mass=0.9))
    clause = next(c for c in report["clauses"] if c["name"] == "unit_mass")
    assert not clause["passed"]
    assert clause["value"] == pytest.approx(0.1, abs=1e-6)


def test_validate_h1_narrow_gaussian_moment():
    report = validate_h1(Kernel.gaussian(0.5))
    assert report["passed"]
    assert report["moments"]["4"] == pytest.approx(math.exp(2.0), rel=1e-7)


def _const_field(n=401, dx=0.1, value=0.7):
    return np.full(n, value), value, value, dx


def test_convolution_fixes_constants(gauss, bump):
    vals, ul, ur, dx = _const_field()
    for k in (gauss, bump):
        out = convolve_values(k, vals, ul, ur, dx)
        assert np.abs(out - 0.7).max() <= 1e-10
        dout = convolve_derivative_values(k, vals, ul, ur, dx)
        assert np.abs(dout).max() <= 1e-10


def test_convolution_of_step_at_origin(gauss):
    dx = 0.1
    x = -20.0 + dx * np.arange(401)
    step = np.where(x < 0, 1.0, np.where(x > 0, 0.0, 0.5))
    out = convolve_values(gauss, step, 1.0, 0.0, dx)
    i0 = int(np.argmin(np.abs(x)))
    assert out[i0] == pytest.approx(0.5, abs=1e-6)


def test_derivative_convolution_of_step(gauss):
    # oracle: the boundary-term reduction of the integral is -J(0); checked
    # against fine-grid quadrature of the same reduction
    dx = 0.1
    x = -20.0 + dx * np.arange(401)
    step = np.where(x < 0, 1.0, np.where(x > 0, 0.0, 0.5))
    dout = convolve_derivative_values(gauss, step, 1.0, 0.0, dx)
    i0 = int(np.argmin(np.abs(x)))
    oracle = simpson(lambda y: gauss.eval_derivative(y), 0.0, 10.0, 20000)
    assert oracle == pytest.approx(-gauss.eval(0.0), abs=1e-12)
    assert dout[i0] == pytest.approx(oracle, abs=1e-3)
    assert abs(dout[i0]) == pytest.approx(gauss.eval(0.0), abs=1e-3)


def test_derivative_convolution_parity(gauss):
    # input odd around (x0, 0.5) makes the output even around x0
    dx = 0.1
    x = -20.0 + dx * np.arange(401)
    u = 0.5 + 0.4 * np.tanh(-x / 2.0)
    out = convolve_derivative_values(gauss, u, 0.9, 0.1, dx)
    i0 = int(np.argmin(np.abs(x)))
    k = 80
    assert np.allclose(out[i0 - k:i0], out[i0 + 1:i0 + k + 1][::-1], atol=1e-9)


def test_corner_exponential_analytic_reduction(bump):
    # beyond the corner's reach, J * min(1, e^-x) == e^-x * moment(1)
    dx = 0.1
    x = -20.0 + dx * np.arange(401)
    corner = np.minimum(1.0, np.exp(-x))
    out = convolve_values(bump, corner, 1.0, 0.0, dx)
    mask = (x > 1.5) & (x < 18.0)
    ratio = out[mask] / (np.exp(-x[mask]) * bump.exp_moment(1.0))
    assert np.abs(ratio - 1.0).max() <= 1e-4


def test_convolution_output_in_convex_hull(gauss):
    rng = np.random.default_rng(3)
    vals = rng.uniform(0.2, 0.8, 401)
    out = convolve_values(gauss, vals, 0.2, 0.8, 0.1)
    assert out.min() >= 0.2 - 1e-12
    assert out.max() <= 0.8 + 1e-12


def test_grid_too_coarse_raises(gauss):
    vals, ul, ur, _ = _const_field()
    with pytest.raises(GridTooCoarseError):
        convolve_values(gauss, vals, ul, ur, 0.5)


def test_convolve_field_wrapper_preserves_tails(gauss):
    field = FieldState(-20.0, 0.1, np.linspace(1.0, 0.0, 401), 1.0, 0.0)
    out = convolve(gauss, field)
    assert out.u_left == 1.0 and out.u_right == 0.0
    assert out.n == field.n


def test_snapshot_roundtrip(tmp_path):
    field = FieldState(-3.0, 0.25, np.linspace(0.9, 0.1, 25), 0.9, 0.1,
                       time=2.5)
    path = tmp_path / "snap.csv"
    write_snapshot(field, path)
    back = read_snapshot(path)
    assert back.x0 == field.x0
    assert back.dx == field.dx
    assert back.time == field.time
    assert back.u_left == field.u_left and back.u_right == field.u_right
    assert np.array_equal(back.values, field.values)
