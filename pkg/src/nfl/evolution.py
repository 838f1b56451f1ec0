"""Time integration of u_t = J*u - u + f(t,x,u) on a recentering window.

The semidiscrete system (quadrature convolution on a uniform grid, constant
tails) is advanced with classical RK4.  The two tail constants are evolved
jointly with the samples, each under its own reaction ODE, so equilibrium
tails stay exact.  The right-hand side is globally Lipschitz and non-stiff,
which makes the explicit scheme both adequate and exactly reproducible.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .fields import FieldState, write_snapshot, read_snapshot
from .fronts import interface_locations
from .kernels import Kernel, convolve_values

MAX_DT = 0.25
OVERSHOOT_TOL = 1e-6


class OvershootError(ValueError):
    """A step left [0,1] beyond the clamp band; the time step is too large."""


class InputsNotOrderedError(ValueError):
    """Comparison inputs are not pointwise ordered."""


@dataclass
class Trajectory:
    """Ordered field snapshots plus integrator metadata and the shift log."""

    snapshots: list
    dt: float
    scheme: str = "rk4"
    shifts: list = field(default_factory=list)  # (time, cells) pairs

    @property
    def times(self) -> np.ndarray:
        return np.asarray([s.time for s in self.snapshots])

    @property
    def dx(self) -> float:
        return self.snapshots[0].dx

    def index_at(self, t: float) -> int:
        times = self.times
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) > 1e-9 + 1e-9 * abs(t):
            raise KeyError(f"no snapshot at t={t}")
        return i

    def at(self, t: float) -> FieldState:
        return self.snapshots[self.index_at(t)]


def _rhs(t, vals, u_left, u_right, xs, nl, kernel, dx):
    conv = convolve_values(kernel, vals, u_left, u_right, dx)
    dvals = conv - vals + nl.reaction(t, xs, vals)
    dl = float(nl.reaction(t, xs[0], u_left))
    dr = float(nl.reaction(t, xs[-1], u_right))
    return dvals, dl, dr


def step(state: FieldState, dt: float, nl, kernel: Kernel) -> FieldState:
    """One RK4 step; the result is clamped to [0,1] inside the overshoot band."""
    if dt > MAX_DT:
        raise ValueError(f"dt={dt} exceeds the stability cap {MAX_DT}")
    xs = state.x
    v, ul, ur = state.values, state.u_left, state.u_right
    t = state.time
    k1, l1, r1 = _rhs(t, v, ul, ur, xs, nl, kernel, state.dx)
    k2, l2, r2 = _rhs(t + dt / 2, v + dt / 2 * k1, ul + dt / 2 * l1,
                      ur + dt / 2 * r1, xs, nl, kernel, state.dx)
    k3, l3, r3 = _rhs(t + dt / 2, v + dt / 2 * k2, ul + dt / 2 * l2,
                      ur + dt / 2 * r2, xs, nl, kernel, state.dx)
    k4, l4, r4 = _rhs(t + dt, v + dt * k3, ul + dt * l3, ur + dt * r3,
                      xs, nl, kernel, state.dx)
    new_v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    new_l = ul + dt / 6 * (l1 + 2 * l2 + 2 * l3 + l4)
    new_r = ur + dt / 6 * (r1 + 2 * r2 + 2 * r3 + r4)
    lo, hi = float(new_v.min()), float(new_v.max())
    if lo < -OVERSHOOT_TOL or hi > 1.0 + OVERSHOOT_TOL:
        raise OvershootError(
            f"overshoot-exceeded: step produced range [{lo}, {hi}]; "
            "reduce dt"
        )
    return state.with_values(np.clip(new_v, 0.0, 1.0), time=t + dt,
                             u_left=min(max(new_l, 0.0), 1.0),
                             u_right=min(max(new_r, 0.0), 1.0))


def evolve(state: FieldState, t_end: float, dt: float, nl, kernel: Kernel,
           recenter_level: float | None = None,
           recenter_threshold: float = 0.25,
           snapshot_stride: int = 1) -> Trajectory:
    """Step repeatedly until ``t_end``, recentering the window on the front.

    When the tracked right edge drifts beyond ``recenter_threshold`` of the
    window half-width from the center, the window shifts by a whole number of
    cells (entrant cells filled with the nearer tail constant); x0 moves with
    the window so absolute positions stay exact.
    """
    n_steps = int(round((t_end - state.time) / dt))
    traj = Trajectory(snapshots=[state], dt=dt)
    half_width = (state.n - 1) * state.dx / 2.0
    cur = state
    for k in range(n_steps):
        cur = step(cur, dt, nl, kernel)
        if recenter_level is not None:
            _, edge = interface_locations(cur, recenter_level)
            center = cur.x0 + half_width
            drift = edge - center
            if abs(drift) > recenter_threshold * half_width:
                cells = int(round(drift / cur.dx))
                if cells != 0:
                    cur = cur.shifted(cells)
                    traj.shifts.append((cur.time, cells))
        if (k + 1) % snapshot_stride == 0 or k == n_steps - 1:
            traj.snapshots.append(cur)
    return traj


def check_comparison(u0: FieldState, v0: FieldState, t_end: float, dt: float,
                     nl, kernel: Kernel, nl_upper=None) -> dict:
    """Evolve an ordered pair and report the worst ordering violation.

    ``nl_upper`` lets the upper solution run under a pointwise larger reaction
    term, covering sandwich comparisons; by default both use ``nl``.
    """
    if np.any(u0.values > v0.values + 1e-15) or u0.u_left > v0.u_left + 1e-15 \
            or u0.u_right > v0.u_right + 1e-15:
        raise InputsNotOrderedError("inputs-not-ordered: need u0 <= v0 pointwise")
    nl_up = nl if nl_upper is None else nl_upper
    lo, hi = u0, v0
    worst = float(np.max(u0.values - v0.values))
    worst_t = float(u0.time)
    n_steps = int(round((t_end - u0.time) / dt))
    for _ in range(n_steps):
        lo = step(lo, dt, nl, kernel)
        hi = step(hi, dt, nl_up, kernel)
        gap = float(np.max(lo.values - hi.values))
        if gap > worst:
            worst, worst_t = gap, lo.time
    return {
        "max_violation": worst,
        "worst_time": worst_t,
        "tolerance": 5e-7,
        "passed": worst <= 5e-7,
    }


def make_initial(tag: str, x0: float, dx: float, n: int, **params) -> FieldState:
    """Build canonical initial profiles on the given grid.

    Tags: plateau_ramp(level, ramp_start), ramp_down(level, x_star),
    ramp_up(level, x_star), smoothed_step(center, width),
    exponential_front(rate, offset).
    """
    x = x0 + dx * np.arange(n)
    if tag == "plateau_ramp":
        level, start = params["level"], params["ramp_start"]
        if not 0.0 < level <= 1.0 or start >= 0.0:
            raise ValueError("plateau_ramp needs level in (0,1] and ramp_start < 0")
        vals = np.clip(level * (x / start), 0.0, level)
        vals[x <= start] = level
        return FieldState(x0, dx, vals, u_left=level, u_right=0.0)
    if tag == "ramp_down":
        level, x_star = params["level"], params["x_star"]
        if not 0.0 < level <= 1.0 or x_star <= 0.0:
            raise ValueError("ramp_down needs level in (0,1] and x_star > 0")
        vals = np.clip(-level * x / x_star, 0.0, level)
        vals[x <= -x_star] = level
        return FieldState(x0, dx, vals, u_left=level, u_right=0.0)
    if tag == "ramp_up":
        level, x_star = params["level"], params["x_star"]
        if not 0.0 <= level < 1.0 or x_star <= 0.0:
            raise ValueError("ramp_up needs level in [0,1) and x_star > 0")
        vals = np.clip(1.0 + (level - 1.0) * x / x_star, level, 1.0)
        vals[x <= 0.0] = 1.0
        return FieldState(x0, dx, vals, u_left=1.0, u_right=level)
    if tag == "smoothed_step":
        center = params.get("center", 0.0)
        width = params.get("width", 1.0)
        if width <= 0:
            raise ValueError("smoothed_step needs width > 0")
        vals = 1.0 / (1.0 + np.exp(np.clip((x - center) / width, -500, 500)))
        return FieldState(x0, dx, vals, u_left=1.0, u_right=0.0)
    if tag == "exponential_front":
        rate = params["rate"]
        offset = params.get("offset", 0.0)
        if rate <= 0:
            raise ValueError("exponential_front needs rate > 0")
        vals = np.minimum(1.0, np.exp(np.clip(-rate * (x - offset), -745, 0)))
        return FieldState(x0, dx, vals, u_left=1.0, u_right=0.0)
    raise ValueError(f"unknown initial profile tag {tag!r}")


def write_trajectory(traj: Trajectory, directory) -> None:
    """Persist snapshots as CSV files plus a JSON index."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, snap in enumerate(traj.snapshots):
        name = f"snapshot_{i:05d}.csv"
        write_snapshot(snap, os.path.join(directory, name))
        paths.append(name)
    index = {
        "dt": traj.dt,
        "scheme": traj.scheme,
        "times": [s.time for s in traj.snapshots],
        "snapshots": paths,
        "shifts": [[t, c] for t, c in traj.shifts],
    }
    with open(os.path.join(directory, "trajectory.json"), "w") as fh:
        json.dump(index, fh, indent=1)


def read_trajectory(directory) -> Trajectory:
    with open(os.path.join(directory, "trajectory.json")) as fh:
        index = json.load(fh)
    snaps = [read_snapshot(os.path.join(directory, p))
             for p in index["snapshots"]]
    return Trajectory(snapshots=snaps, dt=index["dt"], scheme=index["scheme"],
                      shifts=[tuple(s) for s in index["shifts"]])
