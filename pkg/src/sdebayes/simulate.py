"""Euler-Maruyama simulation of the data and covariate processes.

Left-endpoint drift/diffusion evaluation throughout:

    X(t_{k+1}) = X(t_k) + phi_xi(z(t_k)) b_beta(X(t_k)) dt + sigma(X(t_k)) dW_k.

The grid doubles as the observation resolution: simulated values at the grid
points are the data.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .covariates import CovariatePanel, phi_values
from .errors import InvalidArgumentError, SimulationDivergedError
from .grids import Path, TimeGrid, sample_wiener_increments
from .models import CovariateSdeSpec, ParamVector, SdeModel


def _phi_series(model: SdeModel, theta: ParamVector, covariates: CovariatePanel) -> np.ndarray:
    """phi_xi(z(t_k)) at every grid point, shape (n_points,)."""
    theta.validate_for(model)
    if covariates.p != model.p:
        raise InvalidArgumentError(
            f"panel has {covariates.p} covariates, model expects {model.p}"
        )
    return phi_values(covariates, model.active_indices, theta.xi)


def simulate_paths(
    model: SdeModel,
    theta: ParamVector,
    covariates: CovariatePanel,
    x0: float,
    grid: TimeGrid,
    rng: np.random.Generator,
    n_paths: int,
) -> np.ndarray:
    """Simulate n_paths independent trajectories, shape (n_paths, n_points)."""
    if covariates.grid != grid:
        raise InvalidArgumentError("covariates must live on the simulation grid")
    phi = _phi_series(model, theta, covariates)
    dt = grid.dt
    dw = sample_wiener_increments(grid, rng, n_paths=n_paths)
    values = np.empty((n_paths, grid.n_points))
    values[:, 0] = x0
    state = values[:, 0].copy()
    for k in range(grid.n_steps):
        drift = phi[k] * model.drift_base(state, theta.beta)
        state = state + drift * dt + model.diffusion(state) * dw[:, k]
        if not np.all(np.isfinite(state)):
            raise SimulationDivergedError(step=k + 1)
        values[:, k + 1] = state
    return values


def simulate_path(
    model: SdeModel,
    theta: ParamVector,
    covariates: CovariatePanel,
    x0: float,
    grid: TimeGrid,
    rng: np.random.Generator,
) -> Path:
    """Simulate one trajectory under the model."""
    values = simulate_paths(model, theta, covariates, x0, grid, rng, n_paths=1)
    return Path(grid=grid, values=values[0], x0=float(x0))


def simulate_covariates(
    specs: Sequence[CovariateSdeSpec],
    grid: TimeGrid,
    rng: np.random.Generator,
    z0: float = 0.0,
) -> CovariatePanel:
    """Simulate one covariate column per spec with independent Wiener drivers.

    The result is not standardized; run covariates.standardize on it before
    using it in the drift factor of a study model.
    """
    dt = grid.dt
    columns = np.empty((len(specs), grid.n_points))
    for l, spec in enumerate(specs):
        dw = sample_wiener_increments(grid, rng)
        z = np.empty(grid.n_points)
        z[0] = z0
        for k in range(grid.n_steps):
            z[k + 1] = z[k] + spec.drift(z[k : k + 1])[0] * dt + spec.noise_scale * dw[k]
            if not np.isfinite(z[k + 1]):
                raise SimulationDivergedError(step=k + 1)
        columns[l] = z
    return CovariatePanel(grid, columns, standardized=False)
