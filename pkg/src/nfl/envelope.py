"""Two-step construction of a C1 increasing interface envelope.

The first pass turns a jumpy front-position series into a continuous one by
chasing it with lines of half the lower propagation rate and smoothing the
catch-up knots.  The second pass runs the same chase on the continuous trace
with a fixed offset, then replaces each knot by the unique quintic blend
meeting value, slope, and zero-curvature conditions at both ends; its
interior slope never drops below half the lower rate, so the envelope is
increasing with two-sided derivative bounds and stays within a fixed distance
of the input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .hermite import (SMOOTHSTEP_MAX_D1, SMOOTHSTEP_MAX_D2, eval_poly,
                      eval_poly_d1, rise_blend_coeffs, smoothstep)


class BoundsCertificateMissingError(ValueError):
    """The input trace lacks a passing propagation-bounds certificate."""


class BlendSlopeError(RuntimeError):
    """The blend slope stayed below half the lower rate after 8 halvings."""


@dataclass(frozen=True)
class EnvelopeParams:
    """Constants of the envelope construction.

    ``step_offset`` is the vertical gap each chasing line starts with (must
    exceed upper_speed*upper_lag so hits cannot be jumped over), and
    ``blend_width`` the knot-smoothing half-width, capped at half the minimal
    hit gap.
    """

    lower_speed: float
    lower_lag: float
    upper_speed: float
    upper_lag: float
    step_offset: float
    blend_width: float
    lead_time: float = 1.0

    def __post_init__(self):
        if self.lower_speed <= 0 or self.upper_speed < self.lower_speed:
            raise ValueError("need 0 < lower_speed <= upper_speed")
        if self.step_offset <= self.upper_speed * self.upper_lag:
            raise ValueError("step_offset must exceed upper_speed*upper_lag")
        if not 0.0 < self.blend_width < 0.5 * self.min_gap:
            raise ValueError(
                f"blend_width must lie in (0, {0.5 * self.min_gap:.4g})"
            )

    @property
    def chase_slope(self) -> float:
        return self.lower_speed / 2.0

    @property
    def min_gap(self) -> float:
        return (self.step_offset - self.upper_speed * self.upper_lag) \
            / (self.upper_speed - self.chase_slope)

    @property
    def max_gap(self) -> float:
        return (self.step_offset + self.lower_speed * self.lower_lag) \
            / self.chase_slope

    @property
    def slope_min(self) -> float:
        return self.chase_slope

    @property
    def slope_max(self) -> float:
        return self.chase_slope + SMOOTHSTEP_MAX_D1 * self.step_offset \
            / self.blend_width

    @property
    def curvature_max(self) -> float:
        return SMOOTHSTEP_MAX_D2 * self.step_offset / self.blend_width**2

    @property
    def deviation_max(self) -> float:
        return self.step_offset + self.lower_speed * self.lower_lag

    @classmethod
    def from_fit(cls, fit: dict, step_offset: float | None = None,
                 blend_width: float | None = None, lead_time: float = 1.0
                 ) -> "EnvelopeParams":
        """Derive construction constants from a propagation-bounds fit."""
        if not fit.get("certificate", {}).get("passed", False):
            raise BoundsCertificateMissingError(
                "bounds-certificate-missing: fit lacks a passing certificate"
            )
        c2t2 = fit["upper_speed"] * fit["upper_lag"]
        if step_offset is None:
            step_offset = c2t2 + max(1.0, fit["upper_speed"])
        trial = cls(fit["lower_speed"], fit["lower_lag"], fit["upper_speed"],
                    fit["upper_lag"], step_offset,
                    blend_width=1e-9, lead_time=lead_time)
        if blend_width is None:
            blend_width = 0.25 * trial.min_gap
        return cls(fit["lower_speed"], fit["lower_lag"], fit["upper_speed"],
                   fit["upper_lag"], step_offset, blend_width, lead_time)

    def to_dict(self) -> dict:
        return {
            "lower_speed": self.lower_speed, "lower_lag": self.lower_lag,
            "upper_speed": self.upper_speed, "upper_lag": self.upper_lag,
            "step_offset": self.step_offset, "blend_width": self.blend_width,
            "lead_time": self.lead_time,
        }


def _forward_pass(times: np.ndarray, positions: np.ndarray, offset: float,
                  slope: float, blend_width: float):
    """Chase the sampled positions with lines of the given slope.

    Returns knot times/anchors and the smoothed chase values on the sample
    grid.  The chase starts ``offset`` above the series and restarts there at
    every catch-up sample; each restart jump is smoothed just after the knot
    by a quintic that climbs back to the new line from the old line's end, so
    the smoothed chase never exceeds the unsmoothed one and inherits its
    deviation bound.
    """
    knots = [times[0]]
    anchors = [positions[0]]
    out = np.empty_like(positions)
    while True:
        t0, x0 = knots[-1], anchors[-1]
        line = x0 + offset + slope * (times - t0)
        ahead = np.flatnonzero((times > t0) & (positions >= line))
        if ahead.size == 0:
            seg = times >= t0
            out[seg] = line[seg]
            break
        j = ahead[0]
        seg = (times >= t0) & (times < times[j])
        out[seg] = line[seg]
        knots.append(times[j])
        anchors.append(positions[j])
    knots_arr = np.asarray(knots)
    anchors_arr = np.asarray(anchors)
    for t_k, x_k, x_prev, t_prev in zip(knots_arr[1:], anchors_arr[1:],
                                        anchors_arr[:-1], knots_arr[:-1]):
        old_end = x_prev + offset + slope * (t_k - t_prev)
        jump = x_k + offset - old_end
        if jump <= 0:
            continue  # the new line starts below the old: knot already tame
        mask = (times >= t_k) & (times < t_k + blend_width)
        s = (times[mask] - t_k) / blend_width
        newline = x_k + offset + slope * (times[mask] - t_k)
        out[mask] = newline - jump * (1.0 - smoothstep(s))
    return knots_arr, anchors_arr, out


def continuous_modification(times, positions, params: EnvelopeParams,
                            fit: dict | None = None) -> dict:
    """First pass: continuous chase of a possibly jumpy position series.

    Requires the propagation-bounds certificate of the series (pass the fit
    report).  Returns the forward chase on the sample grid, the mirrored
    backward chase, and their sup deviations from the input; the forward
    trace is the continuous modification handed to step 2.
    """
    if fit is not None and not fit.get("certificate", {}).get("passed", False):
        raise BoundsCertificateMissingError(
            "bounds-certificate-missing: certificate did not pass"
        )
    if fit is None:
        raise BoundsCertificateMissingError(
            "bounds-certificate-missing: no fit report supplied"
        )
    t = np.asarray(times, dtype=float)
    x = np.asarray(positions, dtype=float)
    offset = params.upper_speed * (params.lead_time + params.upper_lag)
    # post-knot smoothing no wider than the lead time keeps the stated bound
    bw = min(params.blend_width, params.lead_time)
    _, _, forward = _forward_pass(t, x, offset, params.chase_slope, bw)
    # mirrored pass: reflect time and space, chase, reflect back
    _, _, rev = _forward_pass(-t[::-1], -x[::-1], offset, params.chase_slope,
                              bw)
    backward = -rev[::-1]
    bound = offset + params.lower_speed * params.lower_lag \
        + params.upper_speed * params.upper_lag
    return {
        "times": t,
        "forward": forward,
        "backward": backward,
        "sup_forward": float(np.abs(forward - x).max()),
        "sup_backward": float(np.abs(backward - x).max()),
        "deviation_bound": bound,
    }


@dataclass
class SmoothInterface:
    """The C1 increasing envelope: lines of half the lower rate joined by
    quintic blends at the hit times."""

    params: EnvelopeParams
    knots: np.ndarray          # hit times, first entry is the start point
    anchors: np.ndarray        # input-trace values at the knots
    t_end: float
    blend_coeffs: np.ndarray = field(init=False)

    def __post_init__(self):
        self.blend_coeffs = rise_blend_coeffs(self.params.chase_slope,
                                              self.params.step_offset,
                                              self.params.blend_width)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.t_end)

    def _piece(self, t: np.ndarray) -> np.ndarray:
        """Index of the knot whose chase line is active at each time."""
        return np.clip(np.searchsorted(self.knots, t, side="right") - 1,
                       0, len(self.knots) - 1)

    def value(self, t) -> np.ndarray:
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = self._piece(t)
        p = self.params
        out = self.anchors[i] + p.step_offset \
            + p.chase_slope * (t - self.knots[i])
        nxt = np.minimum(i + 1, len(self.knots) - 1)
        in_blend = (nxt > i) & (t > self.knots[nxt] - p.blend_width)
        if in_blend.any():
            s = t[in_blend] - self.knots[nxt[in_blend]]
            out[in_blend] = self.anchors[nxt[in_blend]] + eval_poly(
                self.blend_coeffs, s)
        return out[0] if scalar else out

    def derivative(self, t) -> np.ndarray:
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = self._piece(t)
        p = self.params
        out = np.full(t.shape, p.chase_slope)
        nxt = np.minimum(i + 1, len(self.knots) - 1)
        in_blend = (nxt > i) & (t > self.knots[nxt] - p.blend_width)
        if in_blend.any():
            s = t[in_blend] - self.knots[nxt[in_blend]]
            out[in_blend] = eval_poly_d1(self.blend_coeffs, s)
        return out[0] if scalar else out

    def knot_mismatch(self) -> float:
        """Largest one-sided value/derivative disagreement at the junctions."""
        p = self.params
        worst = 0.0
        for k in range(1, len(self.knots)):
            tk = self.knots[k]
            left_line_val = self.anchors[k - 1] + p.step_offset \
                + p.chase_slope * (tk - p.blend_width - self.knots[k - 1])
            blend_start_val = self.anchors[k] + eval_poly(
                self.blend_coeffs, np.array([-p.blend_width]))[0]
            blend_end_val = self.anchors[k] + eval_poly(
                self.blend_coeffs, np.array([0.0]))[0]
            next_line_val = self.anchors[k] + p.step_offset
            dstart = eval_poly_d1(self.blend_coeffs,
                                  np.array([-p.blend_width]))[0]
            dend = eval_poly_d1(self.blend_coeffs, np.array([0.0]))[0]
            worst = max(worst,
                        abs(left_line_val - blend_start_val),
                        abs(next_line_val - blend_end_val),
                        abs(dstart - p.chase_slope),
                        abs(dend - p.chase_slope))
        return worst

    def to_json(self) -> str:
        return json.dumps({
            "params": self.params.to_dict(),
            "knots": self.knots.tolist(),
            "anchors": self.anchors.tolist(),
            "t_end": self.t_end,
            "blend_coeffs": self.blend_coeffs.tolist(),
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SmoothInterface":
        data = json.loads(text)
        return cls(EnvelopeParams(**data["params"]),
                   np.asarray(data["knots"]), np.asarray(data["anchors"]),
                   data["t_end"])


def smooth_modification(times, positions, params: EnvelopeParams,
                        max_halvings: int = 8) -> SmoothInterface:
    """Second pass: hit times by bisection on the continuous trace, then
    blends.

    The blend slope is checked against half the lower rate on a dense grid;
    a violation halves the blend width (the quintic never actually violates
    it, but the certificate is cheap and guards parameter edits).
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(positions, dtype=float)
    p = params
    for _ in range(max_halvings):
        s_dense = np.linspace(-p.blend_width, 0.0, 257)
        coeffs = rise_blend_coeffs(p.chase_slope, p.step_offset, p.blend_width)
        if eval_poly_d1(coeffs, s_dense).min() >= p.chase_slope - 1e-12:
            break
        p = EnvelopeParams(p.lower_speed, p.lower_lag, p.upper_speed,
                           p.upper_lag, p.step_offset, p.blend_width / 2.0,
                           p.lead_time)
    else:
        raise BlendSlopeError(
            "blend-slope-violation persists after 8 halvings; parameters "
            "are inconsistent"
        )

    def interp(tq):
        return np.interp(tq, t, x)

    knots = [float(t[0])]
    anchors = [float(x[0])]
    while True:
        t0, x0 = knots[-1], anchors[-1]

        def gap(tq):
            return interp(tq) - (x0 + p.step_offset
                                 + p.chase_slope * (tq - t0))

        # first sample past the chase line, then bisection inside the cell
        idx = np.flatnonzero((t > t0) & (gap(t) >= 0.0))
        if idx.size == 0:
            break
        j = idx[0]
        a = max(t0, t[j - 1]) if j > 0 else t0
        b = t[j]
        if gap(a) >= 0.0:
            hit = a
        else:
            for _ in range(80):
                mid = 0.5 * (a + b)
                if gap(mid) >= 0.0:
                    b = mid
                else:
                    a = mid
                if b - a < 1e-12 * max(1.0, abs(b)):
                    break
            hit = b
        knots.append(float(hit))
        anchors.append(float(interp(hit)))
    return SmoothInterface(params=p, knots=np.asarray(knots),
                           anchors=np.asarray(anchors), t_end=float(t[-1]))


def verify_envelope(env: SmoothInterface, times, positions,
                    oversample: int = 10) -> dict:
    """Dense-scan certificate for the envelope against its input trace."""
    t = np.asarray(times, dtype=float)
    x = np.asarray(positions, dtype=float)
    lo, hi = env.domain
    dense = np.linspace(lo, hi, oversample * t.size)
    vals = env.value(dense)
    derivs = env.derivative(dense)
    dev = vals - np.interp(dense, t, x)
    # every inter-hit gap, including the one from the start point
    gaps = np.diff(env.knots) if len(env.knots) > 1 else np.array([])
    p = env.params
    report = {
        "knot_mismatch": env.knot_mismatch(),
        "derivative_min": float(derivs.min()),
        "derivative_max": float(derivs.max()),
        "slope_floor": p.slope_min,
        "slope_cap": p.slope_max,
        "sup_deviation": float(np.abs(dev).max()),
        "deviation_sign_min": float(dev.min()),
        "deviation_bound": p.deviation_max,
        "hit_gaps": gaps.tolist(),
        "gap_interval": [p.min_gap, p.max_gap],
        "hit_count": int(len(env.knots) - 1),
    }
    report["passed"] = bool(
        report["knot_mismatch"] <= 1e-10
        and report["derivative_min"] >= p.slope_min - 1e-9
        and report["derivative_max"] <= p.slope_max + 1e-9
        and report["sup_deviation"] <= p.deviation_max + 1e-9
        and all(p.min_gap - 1e-6 <= g <= p.max_gap + 1e-6 for g in gaps)
    )
    return report
