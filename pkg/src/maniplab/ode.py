"""Fixed-step backward integration of terminal-value ODE systems.

One numeric engine backs every coefficient system in the package: classical
4th-order Runge-Kutta stepped from T down to 0 on a uniform grid, producing
a dense table with one row per grid point. Fixed stepping keeps tables
bit-for-bit reproducible and directly consumable by the simulators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np


class DivergenceError(RuntimeError):
    """State magnitude blew past the cap during integration.

    For the quadratic coefficient systems this signals a Riccati escape
    inside the horizon: no solution exists down to t = 0.
    """

    def __init__(self, message: str, t: float, magnitude: float):
        super().__init__(message)
        self.t = t
        self.magnitude = magnitude


class GridError(ValueError):
    """Invalid grid or out-of-range evaluation point."""


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_n = T."""

    T: float
    n_steps: int

    def __post_init__(self):
        if not (self.T > 0.0 and np.isfinite(self.T)):
            raise GridError(f"T > 0 required, got {self.T}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise GridError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def h(self) -> float:
        return self.T / self.n_steps

    @cached_property
    def points(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)


@dataclass(frozen=True, eq=False)
class OdeSystem:
    """Terminal-value system y'(t) = rhs(t, y), y(T) = terminal.

    ``rhs`` must be a pure function of (t, state) returning the forward
    time-derivative vector.
    """

    dimension: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    terminal: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        terminal = np.asarray(self.terminal, dtype=float)
        if terminal.shape != (self.dimension,):
            raise GridError(
                f"terminal must have shape ({self.dimension},), got {terminal.shape}"
            )
        if not np.all(np.isfinite(terminal)):
            raise GridError("terminal condition must be finite")
        object.__setattr__(self, "terminal", terminal)
        if self.names is not None and len(self.names) != self.dimension:
            raise GridError("names length must match dimension")


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """Time-gridded coefficient values; row k holds the state at points[k]."""

    grid: TimeGrid
    names: tuple[str, ...]
    values: np.ndarray  # shape (n_steps + 1, len(names))

    def __post_init__(self):
        if self.values.shape != (self.grid.n_steps + 1, len(self.names)):
            raise GridError(
                f"values shape {self.values.shape} inconsistent with grid/names"
            )
        self.values.setflags(write=False)

    def col(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def interpolate(self, t: float) -> np.ndarray:
        """Linear interpolation between bracketing rows; exact at grid points."""
        T, n = self.grid.T, self.grid.n_steps
        if not (-1e-12 * max(T, 1.0) <= t <= T * (1.0 + 1e-12)):
            raise GridError(f"t = {t} outside [0, {T}]")
        t = min(max(t, 0.0), T)
        x = t / self.grid.h
        k = min(int(x), n - 1)
        w = x - k
        return (1.0 - w) * self.values[k] + w * self.values[k + 1]

    def to_csv_text(self) -> str:
        """CSV with header ``t,<name1>,...`` at 17 significant digits."""
        lines = ["t," + ",".join(self.names)]
        points = self.grid.points
        for k in range(self.grid.n_steps + 1):
            row = ",".join(f"{v:.17g}" for v in self.values[k])
            lines.append(f"{points[k]:.17g},{row}")
        return "\n".join(lines) + "\n"


def integrate_backward(
    system: OdeSystem,
    grid: TimeGrid,
    divergence_cap: float = 1e12,
) -> CoefficientTable:
    """Classical RK4 from T down to 0; row k of the result holds y(points[k]).

    The terminal row equals the terminal condition exactly (no step past T).
    Raises DivergenceError as soon as any state magnitude exceeds the cap.
    """
    n = grid.n_steps
    points = grid.points
    values = np.empty((n + 1, system.dimension))
    y = system.terminal.copy()
    values[n] = y
    rhs = system.rhs
    s = -grid.h  # backward step
    for k in range(n, 0, -1):
        t = points[k]
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * s, y + (0.5 * s) * k1)
        k3 = rhs(t + 0.5 * s, y + (0.5 * s) * k2)
        k4 = rhs(t + s, y + s * k3)
        y = y + (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        mag = float(np.max(np.abs(y)))
        if not np.isfinite(mag) or mag > divergence_cap:
            raise DivergenceError(
                f"state magnitude {mag:.3g} exceeded cap {divergence_cap:.3g} at "
                f"t = {points[k - 1]:.6g}: Riccati blow-up inside the horizon",
                t=float(points[k - 1]),
                magnitude=mag,
            )
        values[k - 1] = y
    names = system.names or tuple(f"x{i}" for i in range(system.dimension))
    return CoefficientTable(grid=grid, names=tuple(names), values=values)


def tail_integral_trapezoid(integrand: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """I(t_k) = integral of f from t_k to T by the trapezoid rule on the grid."""
    f = np.asarray(integrand, dtype=float)
    if f.shape != (grid.n_steps + 1,):
        raise GridError("integrand must be sampled on the grid")
    steps = 0.5 * grid.h * (f[1:] + f[:-1])
    out = np.zeros(grid.n_steps + 1)
    out[:-1] = np.cumsum(steps[::-1])[::-1]
    return out
