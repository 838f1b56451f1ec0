"""Reaction terms: homogeneous families and heterogeneous blends.

Families on [0, 1] (all vanish at 0 and 1):

* kpp        a*u*(1-u)
* bistable   a*u*(1-u)*(u-theta), middle zero theta in (0,1)
* ignition   0 on [0, theta_ig], a*(u-theta_ig)^2*(1-u) above; the squared
             factor keeps the slope at 1 strictly negative, -a*(1-theta_ig)^2.

A heterogeneous term blends two homogeneous members with a smooth space-time
modulation m(t,x) in [0,1]:  f = (1-m)*f_lo + m*f_hi.  Evaluation is extended
by zero outside [0,1] (safe for the bounded-state dynamics) within a small
overshoot band; states beyond the band raise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OVERSHOOT_TOL = 1e-6


class StateRangeError(ValueError):
    """State argument outside [0,1] beyond the overshoot tolerance."""


def _check_state(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.size and (u.min() < -OVERSHOOT_TOL or u.max() > 1.0 + OVERSHOOT_TOL):
        raise StateRangeError(
            f"out-of-range state: [{u.min()}, {u.max()}] exceeds the "
            f"{OVERSHOOT_TOL} overshoot band around [0,1]"
        )
    return u


@dataclass(frozen=True)
class Homogeneous:
    """A space-time independent reaction term u -> f(u)."""

    family: str
    theta: float = 0.0       # middle zero (bistable) or ignition temperature
    amplitude: float = 1.0

    def __post_init__(self):
        if self.family not in ("kpp", "bistable", "ignition"):
            raise ValueError(f"unknown nonlinearity family {self.family!r}")
        if self.family in ("bistable", "ignition") and not 0.0 < self.theta < 1.0:
            raise ValueError("threshold must lie in (0,1)")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")

    @classmethod
    def kpp(cls, amplitude: float = 1.0) -> "Homogeneous":
        return cls("kpp", amplitude=amplitude)

    @classmethod
    def bistable(cls, theta: float, amplitude: float = 1.0) -> "Homogeneous":
        return cls("bistable", theta, amplitude)

    @classmethod
    def ignition(cls, theta_ig: float, amplitude: float = 4.0) -> "Homogeneous":
        return cls("ignition", theta_ig, amplitude)

    # closed forms on [0,1]; callers handle the zero extension
    def _f_inside(self, u):
        a, th = self.amplitude, self.theta
        if self.family == "kpp":
            return a * u * (1.0 - u)
        if self.family == "bistable":
            return a * u * (1.0 - u) * (u - th)
        return np.where(u > th, a * (u - th) ** 2 * (1.0 - u), 0.0)

    def _fu_inside(self, u):
        a, th = self.amplitude, self.theta
        if self.family == "kpp":
            return a * (1.0 - 2.0 * u)
        if self.family == "bistable":
            return a * (-3.0 * u**2 + 2.0 * (1.0 + th) * u - th)
        return np.where(u > th, a * (u - th) * (2.0 * (1.0 - u) - (u - th)), 0.0)

    def f(self, u) -> np.ndarray:
        u = _check_state(u)
        inside = (u >= 0.0) & (u <= 1.0)
        return np.where(inside, self._f_inside(np.clip(u, 0.0, 1.0)), 0.0)

    def fu(self, u) -> np.ndarray:
        u = _check_state(u)
        inside = (u >= 0.0) & (u <= 1.0)
        return np.where(inside, self._fu_inside(np.clip(u, 0.0, 1.0)), 0.0)

    def integral(self) -> float:
        """Closed-form integral of f over [0,1]."""
        a, th = self.amplitude, self.theta
        if self.family == "kpp":
            return a / 6.0
        if self.family == "bistable":
            return a * (1.0 - 2.0 * th) / 12.0
        # int_th^1 (u-th)^2 (1-u) du with s = u-th, w = 1-th
        w = 1.0 - th
        return a * (w**3 / 3.0 - w**4 / 4.0)

    def reflected(self) -> "_Reflected":
        """The 1-u state reflection, f~(v) = -f(1-v)."""
        return _Reflected(self)

    # uniform interface so homogeneous and heterogeneous terms interchange
    def reaction(self, t, x, u) -> np.ndarray:
        return self.f(u)

    def reaction_u(self, t, x, u) -> np.ndarray:
        return self.fu(u)

    def reaction_x(self, t, x, u) -> np.ndarray:
        u = _check_state(u)
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(x), u).shape)

    def describe(self) -> dict:
        return {"family": self.family, "theta": self.theta,
                "amplitude": self.amplitude}


class _Reflected:
    """State reflection v -> -f(1-v) of a homogeneous term."""

    def __init__(self, base: Homogeneous):
        self.base = base

    def f(self, v):
        return -self.base.f(1.0 - np.asarray(v, dtype=float))

    def fu(self, v):
        return self.base.fu(1.0 - np.asarray(v, dtype=float))

    def integral(self) -> float:
        return -self.base.integral()

    def reaction(self, t, x, u):
        return self.f(u)

    def reaction_u(self, t, x, u):
        return self.fu(u)

    def reaction_x(self, t, x, u):
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(x),
                                     np.asarray(u)).shape)


@dataclass(frozen=True)
class Modulation:
    """Smooth blend weight m(t,x) = 0.5*(1 + amp*sin(omega_t t)*sin(omega_x x))."""

    amp: float = 1.0
    omega_t: float = 0.7
    omega_x: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.amp <= 1.0:
            raise ValueError("modulation amp must lie in [0,1]")

    def m(self, t, x):
        return 0.5 * (1.0 + self.amp * np.sin(self.omega_t * np.asarray(t))
                      * np.sin(self.omega_x * np.asarray(x)))

    def m_x(self, t, x):
        return 0.5 * self.amp * self.omega_x * np.sin(self.omega_t * np.asarray(t)) \
            * np.cos(self.omega_x * np.asarray(x))


@dataclass(frozen=True)
class Heterogeneous:
    """Space-time blend (1-m)*f_lo + m*f_hi of two homogeneous members.

    The members must be pointwise ordered, f_lo <= f_hi on [0,1], so that the
    blend is sandwiched between them for every (t,x).
    """

    lower: Homogeneous
    upper: Homogeneous
    modulation: Modulation = field(default_factory=Modulation)

    def __post_init__(self):
        u = np.linspace(0.0, 1.0, 201)
        gap = self.upper.f(u) - self.lower.f(u)
        if gap.min() < -1e-12:
            raise ValueError("blend members are not ordered: need f_lo <= f_hi")

    def f(self, t, x, u) -> np.ndarray:
        m = self.modulation.m(t, x)
        return (1.0 - m) * self.lower.f(u) + m * self.upper.f(u)

    def fu(self, t, x, u) -> np.ndarray:
        m = self.modulation.m(t, x)
        return (1.0 - m) * self.lower.fu(u) + m * self.upper.fu(u)

    def fx(self, t, x, u) -> np.ndarray:
        return self.modulation.m_x(t, x) * (self.upper.f(u) - self.lower.f(u))

    def fxu(self, t, x, u) -> np.ndarray:
        return self.modulation.m_x(t, x) * (self.upper.fu(u) - self.lower.fu(u))

    reaction = f
    reaction_u = fu
    reaction_x = fx

    def describe(self) -> dict:
        return {"family": "blend", "lower": self.lower.describe(),
                "upper": self.upper.describe(),
                "modulation": {"amp": self.modulation.amp,
                               "omega_t": self.modulation.omega_t,
                               "omega_x": self.modulation.omega_x}}


def eval_f(nl, t, x, u):
    """Evaluate the reaction term; homogeneous terms ignore (t,x)."""
    return nl.reaction(t, x, u)


def eval_fu(nl, t, x, u):
    return nl.reaction_u(t, x, u)


def eval_fx(nl, t, x, u):
    return nl.reaction_x(t, x, u)


def _lattice(extent: float = 20.0, points: int = 101) -> np.ndarray:
    return np.linspace(-extent, extent, points)


def validate_family(nl: Homogeneous, samples: int = 2001) -> dict:
    """Check the family-defining sign/shape clauses on a state grid."""
    u = np.linspace(0.0, 1.0, samples)
    interior = u[1:-1]
    clauses = [
        {"name": "f(0)=0", "value": float(nl.f(0.0)), "passed": nl.f(0.0) == 0.0},
        {"name": "f(1)=0", "value": float(nl.f(1.0)), "passed": nl.f(1.0) == 0.0},
    ]
    if nl.family == "kpp":
        ratio = nl.f(interior) / interior
        clauses += [
            {"name": "positive_on_(0,1)", "value": float(nl.f(interior).min()),
             "passed": bool(nl.f(interior).min() > 0.0)},
            {"name": "f/u_nonincreasing", "value": float(np.diff(ratio).max()),
             "passed": bool(np.diff(ratio).max() <= 1e-12)},
        ]
    elif nl.family == "ignition":
        th = nl.theta
        below = u[u <= th]
        above = interior[interior > th]
        clauses += [
            {"name": "flat_below_threshold", "value": float(np.abs(nl.f(below)).max()),
             "passed": bool(np.abs(nl.f(below)).max() == 0.0)},
            {"name": "positive_above_threshold", "value": float(nl.f(above).min()),
             "passed": bool(nl.f(above).min() > 0.0)},
            {"name": "negative_slope_at_1", "value": float(nl.fu(1.0)),
             "passed": bool(nl.fu(1.0) < 0.0)},
        ]
    else:
        th = nl.theta
        lo = interior[interior < th]
        hi = interior[interior > th]
        clauses += [
            {"name": "negative_below_middle", "value": float(nl.f(lo).max()),
             "passed": bool(nl.f(lo).max() < 0.0)},
            {"name": "positive_above_middle", "value": float(nl.f(hi).min()),
             "passed": bool(nl.f(hi).min() > 0.0)},
            {"name": "negative_slope_at_0", "value": float(nl.fu(0.0)),
             "passed": bool(nl.fu(0.0) < 0.0)},
            {"name": "negative_slope_at_1", "value": float(nl.fu(1.0)),
             "passed": bool(nl.fu(1.0) < 0.0)},
            {"name": "positive_slope_at_middle", "value": float(nl.fu(th)),
             "passed": bool(nl.fu(th) > 0.0)},
        ]
    return {"nonlinearity": nl.describe(), "clauses": clauses,
            "passed": all(c["passed"] for c in clauses)}


def validate_h2(nl, theta1: float, extent: float = 20.0, points: int = 101,
                state_points: int = 201, seed: int = 0) -> dict:
    """Sandwich, monotonicity-above-theta1, and lower-member unbalance checks.

    Also reports the sampled maxima of |f_x| and |f_u| over a (t,x,u) lattice.
    """
    rng = np.random.default_rng(seed)
    ts = _lattice(extent, points) + rng.uniform(-0.1, 0.1, points)
    xs = _lattice(extent, points) + rng.uniform(-0.1, 0.1, points)
    u = np.linspace(0.0, 1.0, state_points)
    if isinstance(nl, Heterogeneous):
        lower, upper = nl.lower, nl.upper
        tt, xx = np.meshgrid(ts, xs, indexing="ij")
        fvals = nl.f(tt[..., None], xx[..., None], u[None, None, :])
        lo, hi = lower.f(u), upper.f(u)
        sandwich_lo = float((fvals - lo[None, None, :]).min())
        sandwich_hi = float((hi[None, None, :] - fvals).min())
        fu_vals = nl.fu(tt[..., None], xx[..., None], u[None, None, :])
        fx_vals = nl.fx(tt[..., None], xx[..., None], u[None, None, :])
        above = u >= theta1
        mono = float(fu_vals[..., above].max())
        sup_fx = float(np.abs(fx_vals).max())
        sup_fu = float(np.abs(fu_vals).max())
        unbalance = lower.integral()
    else:
        fu_all = nl.fu(u)
        sandwich_lo = sandwich_hi = 0.0
        mono = float(fu_all[u >= theta1].max())
        sup_fx = 0.0
        sup_fu = float(np.abs(fu_all).max())
        unbalance = nl.integral()
    clauses = [
        {"name": "sandwich_lower", "value": sandwich_lo, "tolerance": -1e-12,
         "passed": sandwich_lo >= -1e-12},
        {"name": "sandwich_upper", "value": sandwich_hi, "tolerance": -1e-12,
         "passed": sandwich_hi >= -1e-12},
        {"name": f"fu_nonpositive_above_{theta1:g}", "value": mono,
         "tolerance": 1e-12, "passed": mono <= 1e-12},
        {"name": "lower_member_unbalance", "value": unbalance, "tolerance": 0.0,
         "passed": unbalance > 0.0},
    ]
    return {"clauses": clauses, "sup_fx": sup_fx, "sup_fu": sup_fu,
            "passed": all(c["passed"] for c in clauses)}


def validate_h3(nl, theta0: float, kappa0: float, extent: float = 20.0,
                points: int = 101, state_points: int = 201) -> bool:
    """True iff the sampled max of f_u over u in [0, theta0] is <= 1 - kappa0."""
    u = np.linspace(0.0, theta0, state_points)
    if isinstance(nl, Heterogeneous):
        ts = _lattice(extent, points)
        xs = _lattice(extent, points)
        tt, xx = np.meshgrid(ts, xs, indexing="ij")
        peak = float(nl.fu(tt[..., None], xx[..., None], u[None, None, :]).max())
    else:
        peak = float(nl.fu(u).max())
    return peak <= 1.0 - kappa0


def sup_fu_bound(nl, state_points: int = 2001, extent: float = 20.0,
                 points: int = 51) -> float:
    """Sampled sup of |f_u| over the state range (and (t,x) for blends)."""
    u = np.linspace(0.0, 1.0, state_points)
    if isinstance(nl, Heterogeneous):
        return float(max(np.abs(nl.lower.fu(u)).max(),
                         np.abs(nl.upper.fu(u)).max()))
    return float(np.abs(nl.fu(u)).max())


def from_config(cfg: dict):
    """Build a reaction term from its config mapping."""
    fam = cfg["family"]
    if fam == "kpp":
        return Homogeneous.kpp(cfg.get("amplitude", 1.0))
    if fam == "bistable":
        return Homogeneous.bistable(cfg["theta"], cfg.get("amplitude", 1.0))
    if fam == "ignition":
        return Homogeneous.ignition(cfg["theta_ig"], cfg.get("amplitude", 4.0))
    if fam == "blend":
        mod_cfg = cfg.get("modulation", {})
        return Heterogeneous(from_config(cfg["lower"]), from_config(cfg["upper"]),
                             Modulation(**mod_cfg))
    raise ValueError(f"unknown nonlinearity family {fam!r}")
