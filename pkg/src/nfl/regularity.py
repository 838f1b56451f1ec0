"""Difference-quotient machinery, region bookkeeping, and ratio checks.

Everything here scans immutable trajectories.  The trajectory must keep a
fixed window (no recenter shifts) so that samples at a fixed abscissa line up
across time; run the producing simulation on a window wide enough for the
whole journey.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .evolution import Trajectory
from .fronts import FrontTrace, interface_locations
from .kernels import Kernel, convolve_derivative_values, convolve_values

U_FLOOR = 1e-300  # positivity floor for ratio fields


class HorizonTooShortError(ValueError):
    """Some probe never crosses the whole middle region on the horizon."""


class InsufficientHistoryError(ValueError):
    """The trajectory does not extend far enough back for the requested tail."""


class StepNotGridMultipleError(ValueError):
    """Difference step is not a positive integer multiple of the grid step."""


class ShiftedWindowError(ValueError):
    """Regularity scans need a trajectory with a fixed (unshifted) window."""


def _require_aligned(traj: Trajectory) -> None:
    if traj.shifts:
        raise ShiftedWindowError(
            "trajectory windows were recentered; regularity scans need a "
            "static window"
        )


@dataclass
class RegularityContext:
    """Region bookkeeping for a front trajectory.

    For each probe abscissa, ``t_first`` is the last sampled time before the
    probe first leaves the region ahead of the front, and ``t_last`` the first
    sampled time after it permanently enters the region behind; their largest
    gap is ``growth_time``, the only stretch on which difference quotients may
    grow.
    """

    theta0: float
    theta1: float
    kappa0: float
    delta0: float
    length_ahead: float      # 1 + delta0 + sup |X - right_edge(theta0)|
    length_behind: float     # 1 + delta0 + sup |X - left_edge(theta1)|
    probes: np.ndarray
    t_first: np.ndarray
    t_last: np.ndarray
    growth_time: float

    def growth_time_bound(self, lower_speed: float, lower_lag: float) -> float:
        """The propagation-estimate bound on the growth time."""
        return lower_lag + (self.length_ahead + self.length_behind + 1.0) \
            / lower_speed


def compute_regions(trace: FrontTrace, theta0: float, theta1: float,
                    delta0: float, probe_step: float = 0.5,
                    pad: float = 1.0) -> RegularityContext:
    """Scan a front trace for per-abscissa first/last middle-region times."""
    if theta0 not in trace.levels or theta1 not in trace.levels:
        raise ValueError("trace must track the theta0 and theta1 levels")
    times = trace.times
    ref = trace.reference
    length_ahead = 1.0 + delta0 + float(np.abs(ref - trace.right[theta0]).max())
    length_behind = 1.0 + delta0 + float(np.abs(ref - trace.left[theta1]).max())
    lo = ref[0] + length_ahead + pad
    hi = ref[-1] - length_behind - pad
    if hi <= lo:
        raise HorizonTooShortError(
            f"horizon-too-short: probe window [{lo:.2f}, {hi:.2f}] is empty"
        )
    probes = np.arange(lo, hi, probe_step)
    t_first = np.empty(probes.size)
    t_last = np.empty(probes.size)
    for i, x in enumerate(probes):
        ahead = x > ref + length_ahead
        behind = x < ref - length_behind
        if not ahead[0] or not behind[-1]:
            raise HorizonTooShortError(
                f"horizon-too-short: probe {x} not strictly ahead at the "
                "start and behind at the end"
            )
        first_exit = int(np.argmin(ahead))            # first sample not ahead
        t_first[i] = times[max(first_exit - 1, 0)]
        last_entry = len(times) - 1 - int(np.argmin(behind[::-1]))
        t_last[i] = times[min(last_entry + 1, len(times) - 1)]
    growth = float((t_last - t_first).max())
    return RegularityContext(theta0=theta0, theta1=theta1, kappa0=math.nan,
                             delta0=delta0, length_ahead=length_ahead,
                             length_behind=length_behind, probes=probes,
                             t_first=t_first, t_last=t_last, growth_time=growth)


@dataclass
class DifferenceField:
    """Space difference quotients of a trajectory at one step eta.

    ``v`` is the difference quotient, ``w`` its ratio to u, ``a`` the reaction
    secant in the state, ``a_tilde`` the space-increment quotient, and ``b``
    the kernel convolution of v; all are (time, grid) arrays on the snapshot
    lattice.
    """

    eta: float
    times: np.ndarray
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    a_tilde: np.ndarray
    b: np.ndarray

    @property
    def w(self) -> np.ndarray:
        return self.v / np.maximum(self.u, U_FLOOR)

    def coupling_sup(self) -> float:
        """Sampled sup of |1 - a|."""
        return float(np.abs(1.0 - self.a).max())

    def forcing_sup(self) -> float:
        """Sampled sup of |b| + |a_tilde|."""
        return float((np.abs(self.b) + np.abs(self.a_tilde)).max())


def difference_fields(traj: Trajectory, eta: float, nl, kernel: Kernel
                      ) -> DifferenceField:
    """Assemble the difference-quotient fields at step eta = k*dx, k >= 1."""
    _require_aligned(traj)
    dx = traj.dx
    k = int(round(eta / dx))
    if k < 1 or abs(k * dx - eta) > 1e-9 * dx:
        raise StepNotGridMultipleError(
            f"step-not-multiple-of-grid: eta={eta} is not a positive "
            f"multiple of dx={dx}"
        )
    times = traj.times
    x = traj.snapshots[0].x
    n = x.size
    u = np.stack([s.values for s in traj.snapshots])
    shifted = np.empty_like(u)
    shifted[:, :n - k] = u[:, k:]
    shifted[:, n - k:] = np.array([[s.u_right] for s in traj.snapshots])
    v = (shifted - u) / eta

    f_here = np.stack([nl.reaction(t, x, row)
                       for t, row in zip(times, u)])
    f_shift_state = np.stack([nl.reaction(t, x, row)
                              for t, row in zip(times, shifted)])
    f_shift_both = np.stack([nl.reaction(t, x + eta, row)
                             for t, row in zip(times, shifted)])
    du = shifted - u
    tiny = np.abs(du) < 1e-12
    safe = np.where(tiny, 1.0, du)
    a = (f_shift_state - f_here) / safe
    mid_fu = np.stack([nl.reaction_u(t, x, row)
                       for t, row in zip(times, (u + shifted) / 2.0)])
    a = np.where(tiny, mid_fu, a)
    a_tilde = (f_shift_both - f_shift_state) / eta
    b = np.stack([
        convolve_values(kernel, row, 0.0, 0.0, dx) for row in v
    ])
    return DifferenceField(eta=eta, times=times, x=x, u=u, v=v, a=a,
                           a_tilde=a_tilde, b=b)


def identity_residual(df: DifferenceField) -> float:
    """Sup-norm residual of the difference-field evolution identity.

    The time derivative is taken by centered differences along the snapshot
    lattice, so the residual floor is the time-sampling error.
    """
    dt = np.diff(df.times)
    if not np.allclose(dt, dt[0], rtol=1e-9):
        raise ValueError("snapshots are not uniformly spaced in time")
    vdot = (df.v[2:] - df.v[:-2]) / (2.0 * dt[0])
    rhs = df.b - df.v + df.a * df.v + df.a_tilde
    return float(np.abs(vdot - rhs[1:-1]).max())


def check_coefficient_bounds(df: DifferenceField, ctx: RegularityContext,
                             kappa0: float, tol: float = 1e-9) -> dict:
    """Scan the reaction secant against its ahead/behind regime bounds.

    Ahead of the front (t < t_first) the secant must stay below 1 - kappa0;
    behind it (t > t_last) below 0.  Violations are report rows.
    """
    idx = np.clip(np.round((ctx.probes - df.x[0]) / (df.x[1] - df.x[0])
                           ).astype(int), 0, df.x.size - 1)
    violations = []
    for j, (i, tf, tl) in enumerate(zip(idx, ctx.t_first, ctx.t_last)):
        col = df.a[:, i]
        ahead = df.times < tf
        behind = df.times > tl
        bad_ahead = col[ahead] > 1.0 - kappa0 + tol
        bad_behind = col[behind] > tol
        if bad_ahead.any():
            t_bad = df.times[ahead][bad_ahead]
            violations.append({"x": float(ctx.probes[j]), "regime": "ahead",
                               "t": float(t_bad[0]),
                               "value": float(col[ahead][bad_ahead].max())})
        if bad_behind.any():
            t_bad = df.times[behind][bad_behind]
            violations.append({"x": float(ctx.probes[j]), "regime": "behind",
                               "t": float(t_bad[0]),
                               "value": float(col[behind][bad_behind].max())})
    return {"eta": df.eta, "probes": int(idx.size),
            "violations": violations, "passed": not violations}


def convolution_ratio_bounds(traj: Trajectory, kernel: Kernel,
                             frame_window: tuple[float, float] | None = None,
                             level: float = 0.5) -> dict:
    """Measured inf/sup of (J*u)/u over the trajectory.

    With ``frame_window`` the scan is restricted to offsets from the tracked
    front position, mirroring frame-anchored ratio statements.
    """
    _require_aligned(traj)
    lo = math.inf
    hi = -math.inf
    for snap in traj.snapshots:
        conv = convolve_values(kernel, snap.values, snap.u_left, snap.u_right,
                               snap.dx)
        vals = snap.values
        mask = vals > 0.0
        if frame_window is not None:
            _, ref = interface_locations(snap, level)
            mask &= (snap.x >= ref + frame_window[0]) \
                & (snap.x <= ref + frame_window[1])
        if mask.any():
            ratio = conv[mask] / vals[mask]
            lo = min(lo, float(ratio.min()))
            hi = max(hi, float(ratio.max()))
    return {"inf": lo, "sup": hi}


def check_ratio_coefficient_bounds(df: DifferenceField, ctx: RegularityContext,
                                   traj: Trajectory, nl, kernel: Kernel,
                                   c3: float, c5: float, tol: float = 1e-9
                                   ) -> dict:
    """Scan the ratio-equation coefficient against its three regime bounds."""
    conv = np.stack([
        convolve_values(kernel, s.values, s.u_left, s.u_right, s.dx)
        for s in traj.snapshots
    ])
    f_over_u = np.stack([nl.reaction(t, df.x, row)
                         for t, row in zip(df.times, df.u)])
    u_safe = np.maximum(df.u, U_FLOOR)
    a2 = -conv / u_safe + df.a - f_over_u / u_safe
    idx = np.clip(np.round((ctx.probes - df.x[0]) / (df.x[1] - df.x[0])
                           ).astype(int), 0, df.x.size - 1)
    violations = []
    for j, (i, tf, tl) in enumerate(zip(idx, ctx.t_first, ctx.t_last)):
        col = a2[:, i]
        for regime, mask, bound in (
                ("ahead", df.times <= tf, -c3 / 2.0),
                ("middle", (df.times >= tf) & (df.times <= tl), c5),
                ("behind", df.times >= tl, -c3)):
            bad = col[mask] > bound + tol
            if bad.any():
                violations.append({"x": float(ctx.probes[j]), "regime": regime,
                                   "bound": bound,
                                   "value": float(col[mask][bad].max())})
    return {"eta": df.eta, "c3": c3, "c5": c5, "violations": violations,
            "passed": not violations}


def ratio_context_threshold(nl, c3: float, theta1: float,
                            state_points: int = 2001) -> float:
    """Ahead-region level for the ratio-equation bookkeeping:
    min(theta1/2, (c3/2)/sup|f|)."""
    u = np.linspace(0.0, 1.0, state_points)
    if hasattr(nl, "lower"):
        sup_f = float(max(np.abs(nl.lower.f(u)).max(),
                          np.abs(nl.upper.f(u)).max()))
    else:
        sup_f = float(np.abs(nl.f(u)).max())
    return min(theta1 / 2.0, (c3 / 2.0) / sup_f)


def ux_profile(traj: Trajectory, t: float, horizon: float, nl, kernel: Kernel
               ) -> tuple[np.ndarray, np.ndarray]:
    """Space-derivative profile at time t from the history-integral formula.

    The integrand pairs the drift J'*u + f_x with exponential damping
    accumulated from 1 - f_u along the trajectory; both integrals use
    composite trapezoid on the snapshot lattice.  The horizon should exceed
    the growth time plus ~10/kappa0 so the dropped tail is negligible.
    """
    _require_aligned(traj)
    times = traj.times
    if t - horizon < times[0] - 1e-9:
        raise InsufficientHistoryError(
            f"insufficient-history: need snapshots back to {t - horizon}, "
            f"trajectory starts at {times[0]}"
        )
    sel = np.flatnonzero((times >= t - horizon - 1e-9) & (times <= t + 1e-9))
    tau = times[sel]
    x = traj.snapshots[0].x
    rows = [traj.snapshots[i] for i in sel]
    u = np.stack([s.values for s in rows])
    drift = np.stack([
        convolve_derivative_values(kernel, s.values, s.u_left, s.u_right, s.dx)
        + np.asarray(nl.reaction_x(tk, x, s.values))
        for tk, s in zip(tau, rows)
    ])
    q = np.stack([1.0 - nl.reaction_u(tk, x, row)
                  for tk, row in zip(tau, u)])
    # damping exponent accumulated from tau up to t (zero at the top)
    expo = np.zeros_like(q)
    dtau = np.diff(tau)
    for j in range(len(tau) - 2, -1, -1):
        expo[j] = expo[j + 1] + 0.5 * dtau[j] * (q[j] + q[j + 1])
    integrand = drift * np.exp(-expo)
    ux = trapezoid(integrand, tau, axis=0)
    return x, ux


def ux_integral(traj: Trajectory, t: float, x: float, horizon: float, nl,
                kernel: Kernel) -> float:
    """The history-integral slope at a single point."""
    xs, ux = ux_profile(traj, t, horizon, nl, kernel)
    return float(np.interp(x, xs, ux))


def centered_slope_profile(traj: Trajectory, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Centered finite-difference slope of a snapshot, the oracle for ux."""
    snap = traj.at(t)
    ext = np.concatenate(([snap.u_left], snap.values, [snap.u_right]))
    return snap.x, (ext[2:] - ext[:-2]) / (2.0 * snap.dx)


def remark_slope_bound(l1_dkernel: float, sup_fx: float, coupling_sup: float,
                       growth_time: float, kappa0: float) -> float:
    """The a-priori sup bound on |u_x| from the history-integral estimate."""
    log_gain = coupling_sup * growth_time
    if log_gain > 600.0:
        return math.inf
    gain = math.exp(log_gain)
    return (l1_dkernel + sup_fx) * (gain / kappa0 + growth_time * gain + 1.0)


def sup_abs_fx(nl, state_points: int = 2001, lattice: int = 201,
               extent: float = 20.0) -> float:
    """Sampled sup of |f_x| over the state range and a (t,x) lattice."""
    if not hasattr(nl, "fx"):
        return 0.0
    u = np.linspace(0.0, 1.0, state_points)
    ts = np.linspace(-extent, extent, lattice)
    xs = np.linspace(-extent, extent, lattice)
    gap = float(np.abs(nl.upper.f(u) - nl.lower.f(u)).max())
    mx = float(np.abs(nl.modulation.m_x(ts[:, None], xs[None, :])).max())
    return gap * mx


def harnack_check(traj: Trajectory, kernel: Kernel, bound: float, rate: float,
                  frame_window: tuple[float, float],
                  level: float | None = 0.5,
                  x_stride: int = 4, t_stride: int = 4) -> dict:
    """Check u(t,x) <= C e^{r|x-y|} u(t,y) on a sampled (t,x,y) lattice.

    The lattice is anchored to the front frame through ``frame_window``
    offsets (absolute coordinates when ``level`` is None); zero values inside
    the window defeat every finite C and are reported as such.  Also reports
    the kernel-ratio constants the bound implies.
    """
    _require_aligned(traj)
    worst = 0.0
    zero_denominator = False
    for snap in traj.snapshots[::t_stride]:
        if level is None:
            ref = 0.0
        else:
            _, ref = interface_locations(snap, level)
        mask = (snap.x >= ref + frame_window[0]) & \
               (snap.x <= ref + frame_window[1])
        vals = snap.values[mask][::x_stride]
        xs = snap.x[mask][::x_stride]
        if vals.size < 2:
            continue
        if (vals <= 0.0).any():
            zero_denominator = True
            continue
        logu = np.log(vals)
        gap = logu[:, None] - logu[None, :] - rate * np.abs(
            xs[:, None] - xs[None, :])
        worst = max(worst, float(np.exp(gap.max())))
    if zero_denominator:
        worst = math.inf
    c3 = _abs_weighted_moment(kernel, rate, negative=True) / bound
    c4 = bound * _abs_weighted_moment(kernel, rate, negative=False)
    return {"rate": rate, "bound": bound, "max_factor": worst,
            "passed": worst <= bound,
            "zero_denominator": zero_denominator,
            "ratio_lower": c3, "ratio_upper": c4}


def _abs_weighted_moment(kernel: Kernel, rate: float, negative: bool) -> float:
    sign = -1.0 if negative else 1.0
    rho = kernel.trunc_radius
    x = np.linspace(-rho, rho, 4001)
    f = kernel.eval(x) * np.exp(sign * rate * np.abs(x))
    h = x[1] - x[0]
    return float(h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum()
                            + 2.0 * f[2:-2:2].sum()))


def find_harnack_constant(traj: Trajectory, kernel: Kernel, rate: float,
                          frame_window: tuple[float, float],
                          candidates=None, **kw) -> dict:
    """Grid search for the smallest passing Harnack constant."""
    if candidates is None:
        candidates = np.geomspace(1.0, 1e6, 61)
    probe = harnack_check(traj, kernel, math.inf, rate, frame_window, **kw)
    needed = probe["max_factor"]
    for c in candidates:
        if needed <= c:
            report = harnack_check(traj, kernel, float(c), rate, frame_window,
                                   **kw)
            report["constant"] = float(c)
            return report
    return {"rate": rate, "passed": False, "max_factor": needed,
            "constant": math.inf}


def exact_decay_check(traj: Trajectory, rate: float, x_window: float,
                      margin: float, level: float = 0.5,
                      frame_shift: float = 0.0) -> dict:
    """Sup deviation of u(t, x + X(t) + shift) e^{r x} from 1 over a frame
    window.

    ``frame_shift`` renormalizes the frame when the tail limit is a positive
    constant other than 1 (shift by log(limit)/rate).
    """
    _require_aligned(traj)
    worst = 0.0
    for snap in traj.snapshots:
        _, ref = interface_locations(snap, level)
        ref += frame_shift
        hi = snap.x_end - margin - ref
        if hi <= x_window:
            raise ValueError(
                "window-exceeds-grid: no room between x_window and the edge"
            )
        offs = np.arange(x_window, hi, snap.dx)
        dev = np.abs(snap.sample(ref + offs) * np.exp(rate * offs) - 1.0)
        worst = max(worst, float(dev.max()))
    return {"rate": rate, "x_window": x_window, "sup_deviation": worst}


def gamma_ratio(kernel: Kernel, rate: float, x_max: float,
                scan_step: float = 0.05, quad_points: int = 4001) -> dict:
    """Deviation of (J * corner-exponential)/corner-exponential from 1.

    Returns the asymptotic deviation and the smallest abscissa beyond which
    the scanned deviation stays within 1.05 of it.
    """
    rho = kernel.trunc_radius
    y = np.linspace(-rho, rho, quad_points)
    wy = np.full(quad_points, 2.0)
    wy[1::2] = 4.0
    wy[0] = wy[-1] = 1.0
    wy *= (y[1] - y[0]) / 3.0
    jw = kernel.eval(y) * wy
    xs = np.arange(0.0, x_max, scan_step)
    gamma_vals = np.minimum(1.0, np.exp(-rate * (xs[:, None] - y[None, :])))
    conv = gamma_vals @ jw
    ratio = conv / np.minimum(1.0, np.exp(-rate * xs))
    deviation = np.abs(ratio - 1.0)
    gamma_inf = float(deviation[-1])
    ceiling = 1.05 * gamma_inf
    suffix_max = np.maximum.accumulate(deviation[::-1])[::-1]
    inside = suffix_max <= ceiling + 1e-15
    m_index = int(np.argmax(inside)) if inside.any() else xs.size - 1
    return {"rate": rate, "gamma": gamma_inf, "settle_abscissa": float(xs[m_index]),
            "x": xs, "deviation": deviation}


def lower_bound_left(traj: Trajectory, length: float, level: float = 0.5) -> dict:
    """Sampled inf of u over the half-line up to length + X(t)."""
    _require_aligned(traj)
    worst = math.inf
    for snap in traj.snapshots:
        _, ref = interface_locations(snap, level)
        mask = snap.x <= ref + length
        cand = [snap.u_left]
        if mask.any():
            cand.append(float(snap.values[mask].min()))
        worst = min(worst, min(cand))
    return {"length": length, "inf": worst, "passed": worst > 0.0}
