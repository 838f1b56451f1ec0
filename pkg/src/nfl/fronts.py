"""Interface locations, front traces, and propagation-rate bound fitting.

The two generalized crossings at a level lam are the rightmost point with
everything to its left above lam (left edge) and the leftmost point with
everything to its right below lam (right edge).  They honor non-monotone
profiles: left edge <= right edge, possibly with a gap.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .fields import FieldState


class LevelNotBracketedError(ValueError):
    """The tail constants do not straddle the requested level."""


class FrontRecededError(ValueError):
    """Fitted lower propagation rate is nonpositive: the front never advances."""


def interface_locations(state: FieldState, level: float) -> tuple[float, float]:
    """Return (left_edge, right_edge) crossings of ``level``.

    Sub-cell positions come from linear interpolation in the crossing cell.
    Requires front-shaped tails, u_left > level > u_right.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0,1)")
    if not (state.u_left > level > state.u_right):
        raise LevelNotBracketedError(
            f"level-not-bracketed: need uL > {level} > uR, have "
            f"uL={state.u_left}, uR={state.u_right}"
        )
    # virtual tail samples just outside the window make the scan total
    u = np.concatenate(([state.u_left], state.values, [state.u_right]))
    x = np.concatenate(([state.x0 - state.dx], state.x,
                        [state.x_end + state.dx]))

    above = u > level
    # left edge: first sample failing "above", crossing in the cell before it
    i = int(np.argmin(above))  # first False (exists: last sample is False)
    x_minus = _cross(x[i - 1], u[i - 1], x[i], u[i], level)

    below = u < level
    # right edge: last sample failing "below"
    j = len(u) - 1 - int(np.argmin(below[::-1]))
    x_plus = _cross(x[j], u[j], x[j + 1], u[j + 1], level)
    return float(x_minus), float(x_plus)


def _cross(xa: float, ua: float, xb: float, ub: float, level: float) -> float:
    if ua == ub:
        return xb
    return xa + (xb - xa) * (ua - level) / (ua - ub)


def interface_width(state: FieldState, eps1: float, eps2: float) -> dict:
    """Diameter of the sample set with eps1 <= u <= eps2 (0 if empty).

    Flags the width as unbounded when either tail constant lies in the band,
    since the band then extends past the sampled window.
    """
    if not 0.0 < eps1 <= eps2 < 1.0:
        raise ValueError("need 0 < eps1 <= eps2 < 1")
    mask = (state.values >= eps1) & (state.values <= eps2)
    unbounded = bool(eps1 <= state.u_left <= eps2 or
                     eps1 <= state.u_right <= eps2)
    if not mask.any():
        width = 0.0
    else:
        idx = np.flatnonzero(mask)
        width = float((idx[-1] - idx[0]) * state.dx)
    return {"width": width, "unbounded": unbounded}


@dataclass
class FrontTrace:
    """Time series of interface locations at tracked levels.

    ``reference`` defaults to the right edge at level 1/2, the robust choice
    for non-monotone profiles; any other interface location differs from it
    by a bounded function.  ``valid`` flags levels whose extraction succeeded
    on every snapshot.
    """

    times: np.ndarray
    levels: tuple[float, ...]
    left: dict = field(default_factory=dict)    # level -> array of left edges
    right: dict = field(default_factory=dict)   # level -> array of right edges
    reference_level: float = 0.5
    valid: dict = field(default_factory=dict)   # level -> bool

    def __post_init__(self):
        for lam in self.levels:
            self.valid.setdefault(lam, True)

    @property
    def reference(self) -> np.ndarray:
        return self.right[self.reference_level]

    def check_invariants(self) -> None:
        tracked = [lam for lam in self.levels if self.valid[lam]]
        for lam in tracked:
            if np.any(self.left[lam] > self.right[lam] + 1e-12):
                raise AssertionError("left edge exceeded right edge")
        ordered = sorted(tracked)
        for lo, hi in zip(ordered, ordered[1:]):
            if np.any(self.right[hi] > self.right[lo] + 1e-12) or \
               np.any(self.left[hi] > self.left[lo] + 1e-12):
                raise AssertionError("edges not nonincreasing in the level")


def extract_trace(snapshots, levels, reference_level: float = 0.5,
                  strict: bool = True) -> FrontTrace:
    """Build a FrontTrace from an iterable of FieldState snapshots.

    With ``strict`` off, levels the tails fail to bracket are marked invalid
    and filled with nan instead of raising; the reference level must always
    extract.
    """
    levels = tuple(levels)
    if reference_level not in levels:
        levels = levels + (reference_level,)
    times, columns = [], {lam: ([], []) for lam in levels}
    valid = {lam: True for lam in levels}
    for snap in snapshots:
        times.append(snap.time)
        for lam in levels:
            try:
                lo, hi = interface_locations(snap, lam)
            except LevelNotBracketedError:
                if strict or lam == reference_level:
                    raise
                valid[lam] = False
                lo = hi = float("nan")
            columns[lam][0].append(lo)
            columns[lam][1].append(hi)
    return FrontTrace(
        times=np.asarray(times),
        levels=levels,
        left={lam: np.asarray(c[0]) for lam, c in columns.items()},
        right={lam: np.asarray(c[1]) for lam, c in columns.items()},
        reference_level=reference_level,
        valid=valid,
    )


def fit_propagation_bounds(times: np.ndarray, positions: np.ndarray,
                           slack: float = 0.1, long_gap_fraction: float = 0.25,
                           ) -> dict:
    """Fit two-sided linear propagation bounds to a front position series.

    Rates come from slopes over long time gaps (> ``long_gap_fraction`` of the
    span), shrunk/stretched by the slack factor; the grace times are then the
    smallest making the bounds hold on EVERY sampled pair.  The returned
    certificate records that exhaustive pairwise check.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(positions, dtype=float)
    if t.size < 3:
        raise ValueError("trace too short to fit propagation bounds")
    dt = t[None, :] - t[:, None]
    dxp = x[None, :] - x[:, None]
    future = dt > 0
    span = t[-1] - t[0]
    long_gap = dt > long_gap_fraction * span
    slopes = dxp[long_gap] / dt[long_gap]
    if slopes.size == 0:
        raise ValueError("no long time gaps in trace")
    lower_speed = (1.0 - slack) * float(slopes.min())
    upper_speed = (1.0 + slack) * float(slopes.max())
    if lower_speed <= 0.0:
        raise FrontRecededError(
            f"nonpositive-c1: fitted lower rate {lower_speed} is not positive"
        )
    # smallest grace times validating the bounds on all pairs
    lower_lag = float(np.clip((dt - dxp / lower_speed)[future].max(), 0.0, None))
    upper_lag = float(np.clip((dxp / upper_speed - dt)[future].max(), 0.0, None))
    ok_lower = dxp[future] >= lower_speed * (dt[future] - lower_lag) - 1e-9
    ok_upper = dxp[future] <= upper_speed * (dt[future] + upper_lag) + 1e-9
    return {
        "lower_speed": lower_speed,
        "lower_lag": lower_lag,
        "upper_speed": upper_speed,
        "upper_lag": upper_lag,
        "certificate": {
            "pairs_checked": int(future.sum()),
            "lower_violations": int((~ok_lower).sum()),
            "upper_violations": int((~ok_upper).sum()),
            "passed": bool(ok_lower.all() and ok_upper.all()),
        },
    }


def check_bounded_width(trace: FrontTrace, lam1: float, lam2: float) -> dict:
    """Sup over time of right-edge(lam1) - left-edge(lam2), plus reference gaps.

    Finite suprema certify the bounded-interface-width property on the sampled
    horizon.
    """
    if not 0.0 < lam1 <= lam2 < 1.0:
        raise ValueError("need 0 < lam1 <= lam2 < 1")
    if lam1 not in trace.levels or lam2 not in trace.levels:
        raise ValueError("levels not tracked in this trace")
    width = trace.right[lam1] - trace.left[lam2]
    ref = trace.reference
    gaps = {}
    for lam in trace.levels:
        gaps[f"{lam:g}"] = {
            "left": float(np.abs(ref - trace.left[lam]).max()),
            "right": float(np.abs(ref - trace.right[lam]).max()),
        }
    return {
        "sup_width": float(width.max()),
        "min_width": float(width.min()),
        "reference_gaps": gaps,
    }


def write_trace(trace: FrontTrace, path) -> None:
    with open(path, "w") as fh:
        fh.write("t,level,Xminus,Xplus\n")
        for lam in trace.levels:
            for tk, lo, hi in zip(trace.times, trace.left[lam], trace.right[lam]):
                fh.write(f"{float(tk)!r},{float(lam)!r},{float(lo)!r},{float(hi)!r}\n")


def read_trace(path, reference_level: float = 0.5) -> FrontTrace:
    with open(path) as fh:
        body = [line for line in fh if line.strip() and
                not line.startswith("t,")]
    data = np.loadtxt(io.StringIO("".join(body)), delimiter=",")
    data = np.atleast_2d(data)
    levels = tuple(np.unique(data[:, 1]))
    left, right, times = {}, {}, None
    for lam in levels:
        rows = data[data[:, 1] == lam]
        order = np.argsort(rows[:, 0])
        rows = rows[order]
        times = rows[:, 0]
        left[lam] = rows[:, 2]
        right[lam] = rows[:, 3]
    return FrontTrace(times=times, levels=levels, left=left, right=right,
                      reference_level=reference_level)
