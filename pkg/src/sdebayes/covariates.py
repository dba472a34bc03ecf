"""Covariate panels on a time grid, with standardization over grid points."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateCovariateError, InvalidArgumentError
from .grids import TimeGrid

Transform = Callable[[np.ndarray], np.ndarray]

STANDARDIZED_TOL = 1e-9


def identity(x: np.ndarray) -> np.ndarray:
    return x


@dataclass(frozen=True)
class CovariatePanel:
    """p covariate series z_l(t_k) on a shared grid.

    columns has shape (p, n_steps + 1).  transforms holds the g_l applied
    wherever the covariates enter the drift factor (identity by default).
    When standardized is True every column has empirical mean 0 and variance 1
    over the grid points (population convention, ddof=0).
    """

    grid: TimeGrid
    columns: np.ndarray
    transforms: tuple[Transform, ...] = ()
    standardized: bool = False

    def __post_init__(self):
        columns = np.atleast_2d(np.asarray(self.columns, dtype=float)).copy()
        if columns.shape[1] != self.grid.n_points:
            raise InvalidArgumentError(
                f"columns must have {self.grid.n_points} points, got {columns.shape[1]}"
            )
        transforms = tuple(self.transforms) if self.transforms else tuple(
            identity for _ in range(columns.shape[0])
        )
        if len(transforms) != columns.shape[0]:
            raise InvalidArgumentError("need one transform per covariate column")
        if self.standardized:
            means = columns.mean(axis=1)
            variances = columns.var(axis=1)
            if np.any(np.abs(means) > STANDARDIZED_TOL) or np.any(
                np.abs(variances - 1.0) > STANDARDIZED_TOL
            ):
                raise InvalidArgumentError(
                    "standardized panel must have mean 0 / variance 1 columns"
                )
        columns.setflags(write=False)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "transforms", transforms)

    @property
    def p(self) -> int:
        return self.columns.shape[0]

    def transformed(self) -> np.ndarray:
        """g_l applied columnwise, shape (p, n_points)."""
        return np.stack([g(col) for g, col in zip(self.transforms, self.columns)])


def empty_panel(grid: TimeGrid) -> CovariatePanel:
    """A panel with zero covariates (intercept-only models)."""
    return CovariatePanel(grid, np.zeros((0, grid.n_points)), transforms=(), standardized=False)


def phi_values(
    panel: CovariatePanel, active_indices: Sequence[int], xi: np.ndarray
) -> np.ndarray:
    """Drift factor xi_0 + sum_l xi_l g_l(z_l(t_k)) at every grid point."""
    xi = np.asarray(xi, dtype=float)
    if len(xi) != 1 + len(active_indices):
        raise InvalidArgumentError(
            f"xi has length {len(xi)}, expected {1 + len(active_indices)}"
        )
    phi = np.full(panel.grid.n_points, xi[0])
    if active_indices:
        g = panel.transformed()[list(active_indices)]
        phi = phi + xi[1:] @ g
    return phi


def standardize(panel: CovariatePanel) -> CovariatePanel:
    """Rescale each column to empirical mean 0 and variance 1 over grid points."""
    columns = panel.columns
    means = columns.mean(axis=1, keepdims=True)
    variances = columns.var(axis=1)
    if np.any(variances <= 0.0):
        bad = int(np.argmax(variances <= 0.0))
        raise DegenerateCovariateError(
            f"covariate column {bad} has zero empirical variance"
        )
    scaled = (columns - means) / np.sqrt(variances)[:, None]
    return CovariatePanel(panel.grid, scaled, panel.transforms, standardized=True)
