"""Bayes-factor covariate and drift selection for systems of SDEs with known diffusion."""

__version__ = "0.1.0"

from .grids import Path, TimeGrid, make_grid, sample_wiener_increments
from .models import CovariateSdeSpec, Diffusion, DriftBase, ParamVector, SdeModel
from .covariates import CovariatePanel, standardize
from .simulate import simulate_covariates, simulate_path, simulate_paths

__all__ = [
    "__version__",
    "Path",
    "TimeGrid",
    "make_grid",
    "sample_wiener_increments",
    "CovariateSdeSpec",
    "Diffusion",
    "DriftBase",
    "ParamVector",
    "SdeModel",
    "CovariatePanel",
    "standardize",
    "simulate_covariates",
    "simulate_path",
    "simulate_paths",
]
