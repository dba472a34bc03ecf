"""Equispaced time grids, sampled trajectories and Wiener increments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class TimeGrid:
    """Equispaced discretization of [t0, t0 + horizon] into n_steps steps."""

    t0: float
    horizon: float
    n_steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise InvalidArgumentError(f"horizon must be positive, got {self.horizon}")
        if self.n_steps < 1:
            raise InvalidArgumentError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    def points(self) -> np.ndarray:
        """All n_steps + 1 grid points t_k = t0 + k*dt."""
        return self.t0 + np.arange(self.n_steps + 1) * self.dt


def make_grid(t0: float, horizon: float, n_steps: int) -> TimeGrid:
    """Build the equispaced grid on [t0, t0 + horizon] with dt = horizon/n_steps."""
    return TimeGrid(float(t0), float(horizon), int(n_steps))


@dataclass(frozen=True)
class Path:
    """A trajectory X(t_k) sampled on a time grid."""

    grid: TimeGrid
    values: np.ndarray
    x0: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise InvalidArgumentError(
                f"path needs {self.grid.n_points} values, got shape {values.shape}"
            )
        if values[0] != self.x0:
            raise InvalidArgumentError("values[0] must equal x0")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("path values must be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def increments(self) -> np.ndarray:
        """The n_steps increments X(t_{k+1}) - X(t_k)."""
        return np.diff(self.values)


def sample_wiener_increments(
    grid: TimeGrid, rng: np.random.Generator, n_paths: int | None = None
) -> np.ndarray:
    """Draw independent Normal(0, dt) increments, one per grid step.

    Returns shape (n_steps,) or, when n_paths is given, (n_paths, n_steps).
    Deterministic for a given generator state.
    """
    scale = np.sqrt(grid.dt)
    if n_paths is None:
        return rng.normal(0.0, scale, size=grid.n_steps)
    return rng.normal(0.0, scale, size=(n_paths, grid.n_steps))
