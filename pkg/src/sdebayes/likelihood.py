"""Girsanov statistics, log-densities and likelihood ratios.

For a path X observed on the grid, a model and parameters theta = (beta, xi),
the two statistics are discretized as left-point sums

    U = sum_k phi(t_k) b(X_k) / sigma^2(X_k) * (X_{k+1} - X_k)
    V = sum_k phi(t_k)^2 b(X_k)^2 / sigma^2(X_k) * dt

and the log-density with respect to the null-drift dominating measure is
U - V/2.  U is always computed from the observed increments, never by
substituting a known drift.

Because phi is linear in xi and every drift base is linear in beta, both
statistics are polynomial in the parameters.  PathStats precomputes the
per-path sufficient arrays once, after which evaluating U and V for any
number of parameter draws is a couple of matrix products; the big prior
Monte-Carlo sweeps in the inference layer rely on this.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariates import CovariatePanel, phi_values
from .errors import DiffusionDegenerateError, InvalidArgumentError
from .grids import Path, TimeGrid
from .models import SIGMA_FLOOR, ParamVector, SdeModel
from .simulate import simulate_paths


@dataclass(frozen=True)
class GirsanovStats:
    u: float
    v: float


@dataclass(frozen=True)
class CrossVariation:
    v_cross: float


def phi_eval(model: SdeModel, theta: ParamVector, covariates: CovariatePanel, k: int) -> float:
    """The drift factor xi_0 + sum over active l of xi_l g_l(z_l(t_k))."""
    theta.validate_for(model)
    series = phi_values(covariates, model.active_indices, theta.xi)
    if not 0 <= k < len(series):
        raise InvalidArgumentError(f"grid index {k} out of range")
    return float(series[k])


class PathStats:
    """Sufficient arrays of one (path, panel, model) triple.

    With p(theta) = outer(xi, beta).ravel(),

        U(theta) = p @ u_vec          V(theta) = p @ v_mat @ p.
    """

    def __init__(self, path: Path, covariates: CovariatePanel, model: SdeModel):
        if covariates.grid != path.grid:
            raise InvalidArgumentError("path and covariates must share a grid")
        x_left = path.values[:-1]
        sigma = model.diffusion(x_left)
        if np.min(np.abs(sigma)) < SIGMA_FLOOR:
            raise DiffusionDegenerateError(
                f"|sigma(x)| fell below {SIGMA_FLOOR} along the path"
            )
        inv_s2 = 1.0 / sigma**2
        dx = np.diff(path.values)
        dt = path.grid.dt

        z_design = np.ones((path.grid.n_steps, model.n_xi))
        if model.active_indices:
            z_design[:, 1:] = covariates.transformed()[list(model.active_indices), :-1].T
        x_design = model.drift_base.design(x_left)

        self.model = model
        self.dim = model.n_xi * model.n_beta
        # rows m_k = kron(z_k, x_k): p @ m_k = phi_k(xi) * b_k(beta)
        self._m = (z_design[:, :, None] * x_design[:, None, :]).reshape(
            path.grid.n_steps, self.dim
        )
        self._w_u = dx * inv_s2
        self._w_v = dt * inv_s2
        self.u_vec = self._w_u @ self._m
        self.v_mat = self._m.T @ (self._w_v[:, None] * self._m)

    def param_rows(self, xi: np.ndarray, beta: np.ndarray) -> np.ndarray:
        """kron(xi, beta) rows for a batch of draws, shape (M, dim)."""
        xi = np.atleast_2d(xi)
        beta = np.atleast_2d(beta)
        return (xi[:, :, None] * beta[:, None, :]).reshape(xi.shape[0], self.dim)

    def u_batch(self, p_rows: np.ndarray) -> np.ndarray:
        return p_rows @ self.u_vec

    def v_batch(self, p_rows: np.ndarray) -> np.ndarray:
        return ((p_rows @ self.v_mat) * p_rows).sum(axis=1)

    def _p(self, theta: ParamVector) -> np.ndarray:
        theta.validate_for(self.model)
        return np.outer(theta.xi, theta.beta).ravel()

    def u(self, theta: ParamVector) -> float:
        return float(self._p(theta) @ self.u_vec)

    def v(self, theta: ParamVector) -> float:
        p = self._p(theta)
        return float(p @ self.v_mat @ p)

    def drift_factor(self, theta: ParamVector) -> np.ndarray:
        """phi(t_k) b(X_k) at the left endpoints, shape (n_steps,)."""
        return self._m @ self._p(theta)

    def cross_with(self, other: "PathStats", theta_other: ParamVector) -> np.ndarray:
        """Vector c with V_cross(theta) = p(theta) @ c, other side held fixed."""
        d_other = other.drift_factor(theta_other)
        return self._m.T @ (self._w_v * d_other)


def girsanov_stats(
    path: Path, covariates: CovariatePanel, model: SdeModel, theta: ParamVector
) -> GirsanovStats:
    """U and V for one path under (model, theta)."""
    stats = PathStats(path, covariates, model)
    return GirsanovStats(u=stats.u(theta), v=stats.v(theta))


def cross_variation(
    path: Path,
    covariates: CovariatePanel,
    model0: SdeModel,
    theta0: ParamVector,
    model1: SdeModel,
    theta1: ParamVector,
) -> CrossVariation:
    """The mixed Riemann sum with both models' drift factors in the integrand."""
    if model0.diffusion != model1.diffusion:
        raise InvalidArgumentError("cross-variation requires a shared diffusion")
    stats0 = PathStats(path, covariates, model0)
    stats1 = PathStats(path, covariates, model1)
    c = stats1.cross_with(stats0, theta0)
    return CrossVariation(v_cross=float(stats1._p(theta1) @ c))


def log_density(
    path: Path, covariates: CovariatePanel, model: SdeModel, theta: ParamVector
) -> float:
    """log f_theta(X) = U - V/2 with respect to the null-drift measure."""
    stats = girsanov_stats(path, covariates, model, theta)
    return stats.u - 0.5 * stats.v


def log_likelihood_ratio(
    path: Path,
    covariates: CovariatePanel,
    model1: SdeModel,
    theta1: ParamVector,
    model0: SdeModel,
    theta0: ParamVector,
) -> float:
    """log f_theta1(X) - log f_theta0(X); antisymmetric in its two models."""
    return log_density(path, covariates, model1, theta1) - log_density(
        path, covariates, model0, theta0
    )


@dataclass(frozen=True)
class GirsanovIdentityReport:
    """Monte-Carlo check that E[U_theta1] equals E[V_theta0,theta1] under theta0."""

    mean_u: float
    mean_vcross: float
    se_u: float
    se_vcross: float
    se_diff: float
    n_paths: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "mean_u": self.mean_u,
            "mean_vcross": self.mean_vcross,
            "se_u": self.se_u,
            "se_vcross": self.se_vcross,
            "se_diff": self.se_diff,
            "n_paths": self.n_paths,
            "pass": self.passed,
        }


def check_girsanov_identity(
    model: SdeModel,
    theta0: ParamVector,
    theta1: ParamVector,
    n_paths: int,
    covariates: CovariatePanel,
    x0: float,
    grid: TimeGrid,
    rng: np.random.Generator,
    model1: SdeModel | None = None,
) -> GirsanovIdentityReport:
    """Simulate under theta0 and compare mean U_theta1 with mean V_theta0,theta1.

    The identity holds for any theta1 (and any candidate model structure
    model1, defaulting to the data-generating one); the difference of the two
    path averages is a martingale average, so the test is |mean difference|
    <= 3 standard errors of the paired difference.
    """
    if n_paths < 100:
        raise InvalidArgumentError("n_paths must be at least 100")
    model1 = model1 or model
    if model1.diffusion != model.diffusion:
        raise InvalidArgumentError("identity check requires a shared diffusion")
    theta0.validate_for(model)
    theta1.validate_for(model1)

    values = simulate_paths(model, theta0, covariates, x0, grid, rng, n_paths)
    x_left = values[:, :-1]
    dx = np.diff(values, axis=1)
    sigma = model.diffusion(x_left)
    if np.min(np.abs(sigma)) < SIGMA_FLOOR:
        raise DiffusionDegenerateError("diffusion degenerate along a simulated path")
    inv_s2 = 1.0 / sigma**2

    phi0 = phi_values(covariates, model.active_indices, theta0.xi)[:-1]
    phi1 = phi_values(covariates, model1.active_indices, theta1.xi)[:-1]
    drift0 = phi0 * model.drift_base(x_left, theta0.beta)
    drift1 = phi1 * model1.drift_base(x_left, theta1.beta)

    u = (drift1 * dx * inv_s2).sum(axis=1)
    v_cross = (drift1 * drift0 * inv_s2).sum(axis=1) * grid.dt

    diff = u - v_cross
    se_u = float(u.std(ddof=1) / np.sqrt(n_paths))
    se_vcross = float(v_cross.std(ddof=1) / np.sqrt(n_paths))
    se_diff = float(diff.std(ddof=1) / np.sqrt(n_paths))
    mean_u = float(u.mean())
    mean_vcross = float(v_cross.mean())
    passed = bool(abs(mean_u - mean_vcross) <= 3.0 * se_diff)
    return GirsanovIdentityReport(
        mean_u=mean_u,
        mean_vcross=mean_vcross,
        se_u=se_u,
        se_vcross=se_vcross,
        se_diff=se_diff,
        n_paths=n_paths,
        passed=passed,
    )
