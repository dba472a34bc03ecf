"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

StudyKind = Literal["case1", "case2", "averaged", "per-individual"]
DriftForm = Literal["affine", "constant", "linear"]


class HealthResponse(BaseModel):
    status: str
    version: str


class StudyOverrides(BaseModel):
    """Optional StudyConfig overrides; unset fields take the kind defaults."""

    model_config = ConfigDict(extra="forbid")

    n_individuals: Optional[int] = None
    horizon: Optional[float] = None
    n_steps: Optional[int] = None
    x0: Optional[float] = None
    p: Optional[int] = None
    sigma0: Optional[float] = None
    sigma_step: Optional[float] = None
    mu_sd: Optional[float] = None
    xi_jitter_sd: Optional[float] = None
    covariate_coef_sd: Optional[float] = None
    prior_sd_fixed: Optional[float] = None
    prior_sd_marginal: Optional[float] = None
    m_draws: Optional[int] = None
    replications: Optional[int] = None
    n_alternatives: Optional[int] = None
    anneal_max_evals: Optional[int] = None
    anneal_iters_per_temp: Optional[int] = None
    anneal_cooling: Optional[float] = None
    anneal_proposal_scale: Optional[float] = None
    theta0_override: Optional[list[float]] = None

    def as_kwargs(self) -> dict:
        out = {k: v for k, v in self.model_dump().items() if v is not None}
        if "theta0_override" in out:
            out["theta0_override"] = tuple(out["theta0_override"])
        return out


class StudyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: StudyKind
    seed: int = 0
    overrides: StudyOverrides = Field(default_factory=StudyOverrides)


class StudyResponse(BaseModel):
    kind: str
    report: dict
    csv: str


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    n_individuals: int = 15
    horizon: float = 1.0
    n_steps: int = 500
    x0: float = 0.0
    p: int = 3
    sigma0: float = 10.0
    sigma_step: float = 5.0
    mu_sd: float = 1.0
    xi_jitter_sd: float = 0.001
    covariate_coef_sd: float = 0.01
    theta0_override: Optional[list[float]] = None


class SimulateResponse(BaseModel):
    times: list[float]
    paths: list[list[float]]
    panel: list[list[float]]
    truth: dict


class KlRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    drift0: DriftForm = "affine"
    theta0: list[float]
    drift1: DriftForm = "affine"
    grid_min: list[float]
    grid_max: list[float]
    grid_points: list[int]
    sigma: float = 1.0
    horizon: float = 1.0
    n_steps: int = 500
    x0: float = 0.0
    n_paths: int = 500


class KlResponse(BaseModel):
    estimate: dict


class GirsanovCheckRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    drift: DriftForm = "affine"
    p: int = 3
    mask0: str = "111"
    mask1: str = "111"
    theta0: list[float]
    theta1: list[float]
    sigma: float = 5.0
    horizon: float = 1.0
    n_steps: int = 500
    x0: float = 0.0
    n_paths: int = 1000
    covariate_coef_sd: float = 0.01


class GirsanovCheckResponse(BaseModel):
    report: dict


class CompanySeries(BaseModel):
    company: str
    prices_csv: str


class MarketRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    companies: list[CompanySeries]
    covariates_csv: str
    dt: float = 1.0 / 252.0
    m_draws: int = 10000
    prior_sd: float = 1.0
    anneal_max_evals: int = 6000


class MarketResponse(BaseModel):
    reports: list[dict]
    combined_csv: str
