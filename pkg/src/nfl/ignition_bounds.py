"""Sub/super-solution squeeze around an ignition traveling wave.

The pair rides the wave with a decaying additive cutoff and a saturating
shift: u(t,x) = phi(z) +- eps e^{-w t} Gamma(z) at z = x - c t - shift(t).
Parameter selection is a deterministic pipeline whose five admissibility
inequalities are re-verified on every emitted parameter set; the residual
verifier evaluates the constructed perturbation part of the evolution
residual in closed form on a space-time lattice, with the numerical wave's
own profile-equation residual reported separately.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .evolution import Trajectory
from .fronts import interface_locations
from .hermite import monotone_ramp, monotone_ramp_d1
from .kernels import Kernel
from .reactions import Homogeneous
from .waves import WaveProfile


class ProfileSlopeDegenerateError(RuntimeError):
    """The wave profile has no negative slope on the middle window."""


class CutoffRateError(RuntimeError):
    """No settle abscissa exists: the cutoff rate is too large for the
    kernel-speed margin."""


class EpsilonCapError(ValueError):
    """Requested squeeze amplitude exceeds the admissible cap."""


class InitialSandwichError(ValueError):
    """Initial data is not sandwiched by the pair at t=0."""


class DecayCapError(ValueError):
    """Initial data decays slower than the hypothesis rate."""


@dataclass(frozen=True)
class Cutoff:
    """Smooth nonincreasing cutoff: 1 left of the wave region, exponential
    decay at ``rate`` right of it, corner-smoothed over +-smoothing around
    the pivot."""

    rate: float
    pivot: float          # abscissa the exponential piece is anchored at
    smoothing: float = 1.0

    def value(self, z) -> np.ndarray:
        s = (np.asarray(z, dtype=float) - self.pivot)
        ramp = self.smoothing * monotone_ramp(s / self.smoothing)
        return np.exp(-self.rate * ramp)

    def slope(self, z) -> np.ndarray:
        s = (np.asarray(z, dtype=float) - self.pivot)
        ramp = self.smoothing * monotone_ramp(s / self.smoothing)
        dramp = monotone_ramp_d1(s / self.smoothing)
        return -self.rate * dramp * np.exp(-self.rate * ramp)


def build_cutoff(rate: float, l1: float, smoothing: float = 1.0) -> Cutoff:
    """Cutoff equal to 1 for z <= -l1-1 and e^{-rate (z-l1)} for z >= l1+1.

    The two prescribed pieces are met exactly (the corner smoothing lives
    inside (l1 - smoothing, l1 + smoothing), smoothing <= 1).
    """
    if not 0.0 < smoothing <= 1.0:
        raise ValueError("smoothing must lie in (0, 1]")
    if l1 <= 0:
        raise ValueError("l1 must be positive")
    return Cutoff(rate=rate, pivot=l1, smoothing=smoothing)


def cutoff_convolution(kernel: Kernel, cutoff: Cutoff, z: np.ndarray,
                       quad_points: int = 4001) -> np.ndarray:
    """(J * Gamma)(z) by composite Simpson against the analytic cutoff."""
    rho = kernel.trunc_radius
    y = np.linspace(-rho, rho, quad_points)
    w = np.full(quad_points, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= (y[1] - y[0]) / 3.0
    jw = kernel.eval(y) * w
    return cutoff.value(z[:, None] - y[None, :]) @ jw


@dataclass(frozen=True)
class SqueezeParams:
    """Selected constants of the squeeze construction, with their
    admissibility conditions re-verified."""

    wave_speed: float
    flat_top: float          # state level above which the slope is uniform
    slope_margin: float      # uniform |f'| lower bound on [flat_top, 1]
    l1: float                # wave window half-length
    l2: float                # settle abscissa of the cutoff convolution
    alpha0: float            # decay hypothesis rate of admissible data
    cutoff_rate: float       # alpha0 / 2
    shift_gain: float        # amplitude of the saturating shift
    decay_rate: float        # temporal decay of the additive correction
    eps_cap: float           # largest admissible squeeze amplitude
    conditions: dict = field(compare=False)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.conditions.values())

    def to_json(self) -> str:
        payload = {k: getattr(self, k) for k in (
            "wave_speed", "flat_top", "slope_margin", "l1", "l2", "alpha0",
            "cutoff_rate", "shift_gain", "decay_rate", "eps_cap")}
        payload["conditions"] = self.conditions
        return json.dumps(payload, indent=1)


def _extended_f(nl: Homogeneous, u) -> np.ndarray:
    """f with linear continuation past 1 (slope f'(1)) and zero below 0."""
    u = np.asarray(u, dtype=float)
    inside = np.clip(u, 0.0, 1.0)
    base = nl._f_inside(inside)
    above = u > 1.0
    fp1 = float(nl._fu_inside(np.asarray(1.0)))
    out = np.where(above, fp1 * (u - 1.0), np.where(u < 0.0, 0.0, base))
    return out


def _sup_abs_fprime_0_2(nl: Homogeneous, points: int = 4001) -> float:
    u = np.linspace(0.0, 1.0, points)
    inside = float(np.abs(nl._fu_inside(u)).max())
    return max(inside, abs(float(nl._fu_inside(np.asarray(1.0)))))


def select_parameters(nl: Homogeneous, wave: WaveProfile, alpha0: float,
                      kernel: Kernel, scan_reach: float = 20.0,
                      level_step: float = 1e-4) -> SqueezeParams:
    """Deterministic selection of all squeeze constants from the wave.

    Follows the admissibility chain: slope margin from f'(1), flat-top level,
    wave window, cutoff settle abscissa, shift gain at its lower admissible
    bound (tightest squeeze), then the decay rate and amplitude cap as the
    minima of their two caps each.
    """
    if nl.family != "ignition":
        raise ValueError("squeeze construction expects an ignition term")
    if wave.speed <= 0:
        raise ValueError("wave speed must be positive")
    c = wave.speed
    slope_margin = 0.5 * abs(float(nl._fu_inside(np.asarray(1.0))))
    levels = np.arange(nl.theta + level_step, 1.0, level_step)
    fp = nl._fu_inside(levels)
    ok = fp <= -slope_margin
    # smallest level from which the margin holds all the way to 1
    holds_onward = np.logical_and.accumulate(ok[::-1])[::-1]
    if not holds_onward.any():
        raise ProfileSlopeDegenerateError("no flat-top level admits the margin")
    flat_top = float(levels[int(np.argmax(holds_onward))])

    target_hi = (1.0 + flat_top) / 2.0
    target_lo = nl.theta / 2.0
    xs = wave.x
    vals = wave.values
    left_ok = xs[vals >= target_hi]
    right_ok = xs[vals <= target_lo]
    if left_ok.size == 0 or right_ok.size == 0:
        raise ProfileSlopeDegenerateError("wave profile does not span the "
                                          "squeeze levels")
    l1 = math.ceil(max(-float(left_ok.max()), float(right_ok.min())) * 2) / 2
    l1 = max(l1, 1.0)

    alpha = alpha0 / 2.0
    cutoff = build_cutoff(alpha, l1)
    z = np.arange(l1 + 1.0, l1 + 1.0 + scan_reach * max(kernel.scale, 1.0),
                  0.05)
    conv = cutoff_convolution(kernel, cutoff, z)
    target = np.exp(-alpha * (z - l1))
    ok = np.abs(conv - target) <= (c / 4.0) * alpha * target
    holds_onward = np.logical_and.accumulate(ok[::-1])[::-1]
    if not holds_onward[-1]:
        raise CutoffRateError(
            f"cutoff rate {alpha} leaves no settle abscissa within the scan"
        )
    l2 = float(z[int(np.argmax(holds_onward))])

    window = (xs >= -l1 - 1.0) & (xs <= l2)
    slope_window = wave.slope(xs[window])
    slope_sup = float(slope_window.max())
    if slope_sup >= 0.0:
        raise ProfileSlopeDegenerateError(
            "profile-slope-degenerate: nonnegative slope on the middle window"
        )
    shift_gain = (1.0 + 2.0 * _sup_abs_fprime_0_2(nl)) / (-slope_sup)

    decay_rate = min(slope_margin, alpha * c / 4.0)
    eps_cap = min((1.0 - flat_top) / 2.0, c / (4.0 * shift_gain))

    conditions = {
        "amplitude_below_flat_gap": {
            "lhs": eps_cap, "rhs": (1.0 - flat_top) / 2.0,
            "passed": eps_cap <= (1.0 - flat_top) / 2.0},
        "decay_below_slope_margin": {
            "lhs": decay_rate, "rhs": slope_margin,
            "passed": decay_rate <= slope_margin},
        "amplitude_below_speed_over_gain": {
            "lhs": eps_cap, "rhs": c / shift_gain,
            "passed": eps_cap <= c / shift_gain},
        "gain_above_slope_bound": {
            "lhs": shift_gain,
            "rhs": (1.0 + 2.0 * _sup_abs_fprime_0_2(nl)) / (-slope_sup),
            "passed": shift_gain >= (1.0 + 2.0 * _sup_abs_fprime_0_2(nl))
            / (-slope_sup) - 1e-12},
        "decay_and_amplitude_vs_cutoff": {
            "lhs": [decay_rate, eps_cap],
            "rhs": [alpha * c / 4.0, c / (4.0 * shift_gain)],
            "passed": decay_rate <= alpha * c / 4.0
            and eps_cap <= c / (4.0 * shift_gain)},
    }
    return SqueezeParams(wave_speed=c, flat_top=flat_top,
                         slope_margin=slope_margin, l1=l1, l2=l2,
                         alpha0=alpha0, cutoff_rate=alpha,
                         shift_gain=shift_gain, decay_rate=decay_rate,
                         eps_cap=eps_cap, conditions=conditions)


@dataclass(frozen=True)
class SqueezePair:
    """Closed-form space-time evaluation rules for the squeeze pair."""

    params: SqueezeParams
    wave: WaveProfile
    nl: Homogeneous
    eps: float
    shift_minus: float
    shift_plus: float
    cutoff: Cutoff = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.eps <= self.params.eps_cap + 1e-15:
            raise EpsilonCapError(
                f"epsilon-exceeds-cap: eps={self.eps} > {self.params.eps_cap}"
            )
        object.__setattr__(self, "cutoff",
                           build_cutoff(self.params.cutoff_rate, self.params.l1))

    def shift(self, t, side: int) -> np.ndarray:
        p = self.params
        base = self.shift_minus if side < 0 else self.shift_plus
        sat = (p.shift_gain * self.eps / p.decay_rate) \
            * (1.0 - np.exp(-p.decay_rate * np.asarray(t, dtype=float)))
        return base + side * sat

    def frame(self, t, x, side: int) -> np.ndarray:
        return np.asarray(x, dtype=float) - self.params.wave_speed \
            * np.asarray(t, dtype=float) - self.shift(t, side)

    def lower(self, t, x) -> np.ndarray:
        z = self.frame(t, x, -1)
        amp = self.eps * np.exp(-self.params.decay_rate
                                * np.asarray(t, dtype=float))
        return self.wave.sample(z) - amp * self.cutoff.value(z)

    def upper(self, t, x) -> np.ndarray:
        z = self.frame(t, x, +1)
        amp = self.eps * np.exp(-self.params.decay_rate
                                * np.asarray(t, dtype=float))
        return self.wave.sample(z) + amp * self.cutoff.value(z)


def select_shifts(u0, pair_params: SqueezeParams, wave: WaveProfile,
                  eps: float, scan_step: float = 0.25,
                  scan_reach: float = 60.0) -> tuple[float, float]:
    """Smallest upper / largest lower shifts sandwiching the initial data."""
    cutoff = build_cutoff(pair_params.cutoff_rate, pair_params.l1)
    x = u0.x
    vals = u0.values
    lo_shift = None
    hi_shift = None
    for xi in np.arange(-scan_reach, scan_reach + scan_step, scan_step):
        upper = wave.sample(x - xi) + eps * cutoff.value(x - xi)
        if hi_shift is None and np.all(upper >= vals - 1e-12):
            hi_shift = float(xi)
        lower = wave.sample(x - xi) - eps * cutoff.value(x - xi)
        if np.all(lower <= vals + 1e-12):
            lo_shift = float(xi)
    if lo_shift is None or hi_shift is None:
        raise InitialSandwichError("no admissible shifts found in the scan")
    return lo_shift, hi_shift


def build_squeeze(params: SqueezeParams, wave: WaveProfile, nl: Homogeneous,
                  eps: float, shift_minus: float, shift_plus: float
                  ) -> SqueezePair:
    pair = SqueezePair(params=params, wave=wave, nl=nl, eps=eps,
                       shift_minus=shift_minus, shift_plus=shift_plus)
    return pair


def _perturbation_residual(pair: SqueezePair, kernel: Kernel, side: int,
                           t: np.ndarray, z: np.ndarray,
                           decay_override: float | None = None) -> np.ndarray:
    """Closed-form perturbation part of the evolution residual at (t, z).

    For the lower member this must be <= 0, for the upper >= 0; the numerical
    wave's own profile-equation residual is excluded here and reported by the
    caller.
    """
    p = pair.params
    w = p.decay_rate if decay_override is None else decay_override
    eps = pair.eps
    c = p.wave_speed
    gamma = pair.cutoff.value(z)
    dgamma = pair.cutoff.slope(z)
    conv = cutoff_convolution(kernel, pair.cutoff, z)
    phi = pair.wave.sample(z)
    dphi = pair.wave.slope(z)
    amp = eps * np.exp(-w * t)[:, None]
    if side < 0:
        state = phi[None, :] - amp * gamma[None, :]
        return (p.shift_gain * amp * dphi[None, :]
                + _extended_f(pair.nl, phi)[None, :] - _extended_f(pair.nl, state)
                + amp * (w * gamma[None, :]
                         + (c - p.shift_gain * amp) * dgamma[None, :]
                         + (conv - gamma)[None, :]))
    state = phi[None, :] + amp * gamma[None, :]
    return (-p.shift_gain * amp * dphi[None, :]
            + _extended_f(pair.nl, phi)[None, :] - _extended_f(pair.nl, state)
            - amp * (w * gamma[None, :]
                     + (c + p.shift_gain * amp) * dgamma[None, :]
                     + (conv - gamma)[None, :]))


def residual_lattice(pair: SqueezePair, kernel: Kernel, side: int,
                     t: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Constructed-part residual values on an explicit (t, z) lattice,
    e.g. for heat-map export."""
    return _perturbation_residual(pair, kernel, side, np.asarray(t, float),
                                  np.asarray(z, float))


def verify_subsolution(pair: SqueezePair, kernel: Kernel,
                       z_window: tuple[float, float] | None = None,
                       horizon: float | None = None, dt_check: float = 0.1,
                       dz_check: float = 0.05,
                       decay_override: float | None = None) -> dict:
    """Residual verification of the lower member on a (t, z) lattice.

    Later times are strictly easier (every constructed term carries the decay
    factor), so the horizon defaults to five decay times.  Case breakdown
    follows the three frame regions: left of the wave window, the window
    itself, and beyond the settle abscissa.
    """
    return _verify_side(pair, kernel, -1, z_window, horizon, dt_check,
                        dz_check, decay_override)


def verify_supersolution(pair: SqueezePair, kernel: Kernel,
                         z_window: tuple[float, float] | None = None,
                         horizon: float | None = None, dt_check: float = 0.1,
                         dz_check: float = 0.05,
                         decay_override: float | None = None) -> dict:
    return _verify_side(pair, kernel, +1, z_window, horizon, dt_check,
                        dz_check, decay_override)


def _verify_side(pair, kernel, side, z_window, horizon, dt_check, dz_check,
                 decay_override) -> dict:
    p = pair.params
    if horizon is None:
        horizon = 5.0 / p.decay_rate
    if z_window is None:
        z_window = (-p.l1 - 1.0 - 4.0 * max(kernel.scale, 1.0) - 5.0,
                    p.l2 + 4.0 * max(kernel.scale, 1.0) + 5.0)
    t = np.arange(0.0, horizon + dt_check, dt_check)
    z = np.arange(z_window[0], z_window[1], dz_check)
    res = _perturbation_residual(pair, kernel, side, t, z, decay_override)
    signed = res if side < 0 else -res
    worst = float(signed.max())
    i, j = np.unravel_index(int(np.argmax(signed)), signed.shape)
    cases = {
        "left": float(signed[:, z <= -p.l1 - 1.0].max()),
        "middle": float(signed[:, (z > -p.l1 - 1.0) & (z < p.l2)].max()),
        "right": float(signed[:, z >= p.l2].max()),
    }
    return {
        "side": "lower" if side < 0 else "upper",
        "max_perturbation_residual": worst,
        "worst_time": float(t[i]),
        "worst_frame_abscissa": float(z[j]),
        "cases": cases,
        "wave_equation_residual": pair.wave.residual,
        "tolerance": 1e-6,
        "passed": worst <= 1e-6,
    }


def verify_squeeze(traj: Trajectory, pair: SqueezePair,
                   tol: float = 5e-6) -> dict:
    """Check the evolved solution stays between the pair on the whole run.

    Raises if the initial snapshot is not sandwiched or decays slower than
    the hypothesis rate.
    """
    first = traj.snapshots[0]
    t0 = first.time
    _check_decay_cap(first, pair.params.alpha0)
    lo0 = pair.lower(t0, first.x)
    hi0 = pair.upper(t0, first.x)
    if np.any(lo0 > first.values + 1e-9) or np.any(hi0 < first.values - 1e-9):
        raise InitialSandwichError(
            "initial-sandwich-violated: data escapes the pair at t=0"
        )
    worst_lower = -math.inf
    worst_upper = -math.inf
    for snap in traj.snapshots:
        lo = pair.lower(snap.time, snap.x)
        hi = pair.upper(snap.time, snap.x)
        worst_lower = max(worst_lower, float((lo - snap.values).max()))
        worst_upper = max(worst_upper, float((snap.values - hi).max()))
    return {
        "max_lower_violation": worst_lower,
        "max_upper_violation": worst_upper,
        "tolerance": tol,
        "passed": worst_lower <= tol and worst_upper <= tol,
    }


def _check_decay_cap(state, alpha0: float, band=(1e-8, 0.2)) -> None:
    vals, x = state.values, state.x
    mask = (vals > band[0]) & (vals < band[1])
    front = np.flatnonzero(vals < 0.5)
    if front.size:
        mask &= x > x[front[0]]
    if mask.sum() >= 8:
        rate = -float(np.polyfit(x[mask], np.log(vals[mask]), 1)[0])
        if rate < alpha0 - 1e-6:
            raise DecayCapError(
                f"initial data tail decays at {rate:.4f} < hypothesis rate "
                f"{alpha0}"
            )


def front_location_control(traj: Trajectory, pair: SqueezePair,
                           level: float = 0.5) -> dict:
    """Gap between the tracked front and the wave frame, bounded by the
    pair's level-crossing band."""
    gaps = []
    for snap in traj.snapshots:
        _, ref = interface_locations(snap, level)
        mid = pair.params.wave_speed * snap.time \
            + 0.5 * (pair.shift(snap.time, -1) + pair.shift(snap.time, +1))
        gaps.append(ref - mid)
    gaps = np.asarray(gaps)
    return {"max_abs_gap": float(np.abs(gaps).max()),
            "final_gap": float(gaps[-1])}
