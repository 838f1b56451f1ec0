"""Sampled field profiles on uniform grids with constant-extension tails."""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

RANGE_TOL = 1e-6  # admissible overshoot outside [0, 1]


class FieldRangeError(ValueError):
    """Raised when sample values leave [0, 1] beyond the overshoot band."""


@dataclass(frozen=True)
class FieldState:
    """A profile u(t, .) sampled on a uniform grid.

    The field is defined on all of the line: left of the window it takes the
    constant value ``u_left``, right of it ``u_right``.  Sample i sits at
    ``x0 + i*dx``.
    """

    x0: float
    dx: float
    values: np.ndarray
    u_left: float
    u_right: float
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("values must be a 1-d array with at least 2 samples")
        lo = min(vals.min(), self.u_left, self.u_right)
        hi = max(vals.max(), self.u_left, self.u_right)
        if lo < -RANGE_TOL or hi > 1.0 + RANGE_TOL:
            raise FieldRangeError(
                f"field values outside [0,1] beyond tolerance: min={lo}, max={hi}"
            )

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def x_end(self) -> float:
        return self.x0 + self.dx * (self.n - 1)

    def sample(self, x) -> np.ndarray:
        """Evaluate the field at arbitrary positions by linear interpolation.

        Positions outside the window return the tail constants.
        """
        return np.interp(np.asarray(x, dtype=float), self.x, self.values,
                         left=self.u_left, right=self.u_right)

    def with_values(self, values: np.ndarray, time: float | None = None,
                    u_left: float | None = None, u_right: float | None = None
                    ) -> "FieldState":
        return replace(
            self,
            values=values,
            time=self.time if time is None else time,
            u_left=self.u_left if u_left is None else u_left,
            u_right=self.u_right if u_right is None else u_right,
        )

    def shifted(self, cells: int) -> "FieldState":
        """Shift the window by an integer number of cells.

        Positive ``cells`` moves the window right; entrant samples are filled
        with the nearer tail constant.  Absolute positions stay exact because
        ``x0`` moves with the window.
        """
        if cells == 0:
            return self
        vals = np.empty_like(self.values)
        k = abs(cells)
        if k >= self.n:
            vals[:] = self.u_right if cells > 0 else self.u_left
        elif cells > 0:
            vals[:-k] = self.values[k:]
            vals[-k:] = self.u_right
        else:
            vals[k:] = self.values[:-k]
            vals[:k] = self.u_left
        return replace(self, x0=self.x0 + cells * self.dx, values=vals)


def uniform_grid(center: float, half_width: float, dx: float) -> tuple[float, int]:
    """Return (x0, n) for a symmetric window around ``center``."""
    half_cells = int(np.ceil(half_width / dx))
    return center - half_cells * dx, 2 * half_cells + 1


def write_snapshot(state: FieldState, path) -> None:
    """Persist a field snapshot as CSV with tail/time header comments."""
    with open(path, "w") as fh:
        fh.write(f"# t={float(state.time)!r}\n")
        fh.write(f"# uL={float(state.u_left)!r}\n")
        fh.write(f"# uR={float(state.u_right)!r}\n")
        fh.write("x,u\n")
        for xi, ui in zip(state.x, state.values):
            fh.write(f"{float(xi)!r},{float(ui)!r}\n")


def read_snapshot(path) -> FieldState:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = float(val)
            elif line != "x,u":
                rows.append(line)
    data = np.loadtxt(io.StringIO("\n".join(rows)), delimiter=",")
    data = np.atleast_2d(data)
    x = data[:, 0]
    dx = float(x[1] - x[0])
    return FieldState(x0=float(x[0]), dx=dx, values=data[:, 1],
                      u_left=meta["uL"], u_right=meta["uR"], time=meta["t"])
