"""Quintic Hermite pieces shared by the envelope and squeeze constructions."""

from __future__ import annotations

import numpy as np


def smoothstep(s):
    """The quintic 6s^5 - 15s^4 + 10s^3: 0 -> 1 with zero slope and curvature
    at both ends."""
    s = np.asarray(s, dtype=float)
    return s**3 * (6.0 * s**2 - 15.0 * s + 10.0)


def smoothstep_d1(s):
    s = np.asarray(s, dtype=float)
    return 30.0 * s**2 * (s - 1.0) ** 2


def smoothstep_d2(s):
    s = np.asarray(s, dtype=float)
    return 60.0 * s * (2.0 * s - 1.0) * (s - 1.0)


SMOOTHSTEP_MAX_D1 = 15.0 / 8.0          # at s = 1/2
SMOOTHSTEP_MAX_D2 = 10.0 / np.sqrt(3.0)  # at s = (3 +- sqrt(3))/6


def rise_blend_coeffs(slope: float, rise: float, width: float) -> np.ndarray:
    """Coefficients (a0..a5) of the blend on [-width, 0] that joins a line of
    the given slope to a parallel line ``rise`` higher.

    The six pinned quantities: value -slope*width and slope at -width, value
    ``rise`` and the same slope at 0, zero curvature at both ends.
    """
    # delta(s) = slope*s + rise*H((s+width)/width) expanded in powers of s
    w = width
    h_coeff = np.zeros(6)
    # H((s+w)/w) = 10 t^3 - 15 t^4 + 6 t^5, t = (s+w)/w
    for power, c in ((3, 10.0), (4, -15.0), (5, 6.0)):
        poly = np.zeros(6)
        # (s/w + 1)^power expanded
        from math import comb
        for k in range(power + 1):
            poly[k] += comb(power, k) / w**k
        h_coeff += c * poly
    coeffs = rise * h_coeff
    coeffs[1] += slope
    return coeffs


def eval_poly(coeffs: np.ndarray, s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for c in coeffs[::-1]:
        out = out * s + c
    return out


def eval_poly_d1(coeffs: np.ndarray, s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for k in range(len(coeffs) - 1, 0, -1):
        out = out * s + k * coeffs[k]
    return out


def monotone_ramp(s):
    """C2 smoothing of the positive part: 0 for s <= -1, s for s >= 1,
    quintic Hermite bridge between, with nonnegative slope throughout."""
    s = np.asarray(s, dtype=float)
    t = np.clip((s + 1.0) / 2.0, 0.0, 1.0)
    # Hermite data on [-1,1]: value 0 -> 1, slope 0 -> 1, curvature 0 -> 0
    h01 = smoothstep(t)
    h11 = -_h10(1.0 - t)
    bridge = h01 * 1.0 + 2.0 * h11 * 1.0
    return np.where(s <= -1.0, 0.0, np.where(s >= 1.0, s, bridge))


def monotone_ramp_d1(s):
    s = np.asarray(s, dtype=float)
    t = np.clip((s + 1.0) / 2.0, 0.0, 1.0)
    d = (smoothstep_d1(t) + 2.0 * _h10_d1(1.0 - t)) / 2.0
    return np.where(s <= -1.0, 0.0, np.where(s >= 1.0, 1.0, d))


def _h10(t):
    """Quintic Hermite basis: unit start slope, all else zero (second
    derivatives pinned to zero at both ends)."""
    t = np.asarray(t, dtype=float)
    return t - 6.0 * t**3 + 8.0 * t**4 - 3.0 * t**5


def _h10_d1(t):
    t = np.asarray(t, dtype=float)
    return 1.0 - 18.0 * t**2 + 32.0 * t**3 - 15.0 * t**4
