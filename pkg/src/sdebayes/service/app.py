"""FastAPI service exposing the studies and pipelines over HTTP.

The CLI is a thin client of this app (in-process by default); runs are
deterministic per (request, seed), so identical requests return identical
payloads.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import SdeBayesError
from ..grids import make_grid
from ..kl import delta_min
from ..likelihood import check_girsanov_identity
from ..market import combined_table_csv, load_series, run_company_pipeline
from ..models import Diffusion, DriftBase, SdeModel
from ..rng import COVARIATE_STREAM, DATA_STREAM, TRUTH_STREAM, derive_rng
from ..selection import (
    StudyConfig,
    default_config,
    draw_truth,
    generate_dataset,
    generate_panel,
    mask_label,
    run_study,
)
from .schemas import (
    GirsanovCheckRequest,
    GirsanovCheckResponse,
    HealthResponse,
    KlRequest,
    KlResponse,
    MarketRequest,
    MarketResponse,
    SimulateRequest,
    SimulateResponse,
    StudyRequest,
    StudyResponse,
)


def _mask_from_string(raw: str, p: int) -> tuple[bool, ...]:
    if len(raw) != p or any(c not in "01" for c in raw):
        raise HTTPException(status_code=400, detail=f"mask {raw!r} must be {p} binary digits")
    return tuple(c == "1" for c in raw)


def create_app() -> FastAPI:
    app = FastAPI(title="sdebayes", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/studies/run", response_model=StudyResponse)
    def studies_run(request: StudyRequest) -> StudyResponse:
        try:
            config = default_config(
                request.kind, base_seed=request.seed, **request.overrides.as_kwargs()
            )
            report = run_study(config)
        except SdeBayesError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return StudyResponse(kind=request.kind, report=report.to_dict(), csv=report.to_csv())

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(request: SimulateRequest) -> SimulateResponse:
        try:
            config = StudyConfig(
                kind="case1",
                base_seed=request.seed,
                n_individuals=request.n_individuals,
                horizon=request.horizon,
                n_steps=request.n_steps,
                x0=request.x0,
                p=request.p,
                sigma0=request.sigma0,
                sigma_step=request.sigma_step,
                mu_sd=request.mu_sd,
                xi_jitter_sd=request.xi_jitter_sd,
                covariate_coef_sd=request.covariate_coef_sd,
                theta0_override=(
                    tuple(request.theta0_override) if request.theta0_override else None
                ),
            )
            panel = generate_panel(config, derive_rng(config.base_seed, COVARIATE_STREAM))
            theta0 = draw_truth(config, derive_rng(config.base_seed, TRUTH_STREAM))
            mask = (True,) * config.p
            dataset = generate_dataset(
                config, panel, [theta0] * config.n_individuals, [mask] * config.n_individuals
            )
        except SdeBayesError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return SimulateResponse(
            times=config.grid.points().tolist(),
            paths=[ind.path.values.tolist() for ind in dataset],
            panel=panel.columns.tolist(),
            truth={
                "theta0": np.asarray(theta0).tolist(),
                "mask": mask_label(mask),
                "sigmas": [config.sigma(i) for i in range(config.n_individuals)],
                "seed": config.base_seed,
            },
        )

    @app.post("/kl/delta", response_model=KlResponse)
    def kl_delta(request: KlRequest) -> KlResponse:
        drift0 = DriftBase(request.drift0)
        drift1 = DriftBase(request.drift1)
        dim1 = 1 + drift1.n_params
        if not (len(request.grid_min) == len(request.grid_max) == len(request.grid_points) == dim1):
            raise HTTPException(
                status_code=400,
                detail=f"grid specs must have {dim1} entries (xi0 plus drift coefficients)",
            )
        model0 = SdeModel(drift0, (), Diffusion.constant(request.sigma))
        model1 = SdeModel(drift1, (), Diffusion.constant(request.sigma))
        theta0 = model0.param_vector(np.asarray(request.theta0, dtype=float))
        axes = [
            np.linspace(lo, hi, max(1, n))
            for lo, hi, n in zip(request.grid_min, request.grid_max, request.grid_points)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        flats = np.stack([m.ravel() for m in mesh], axis=1)
        param_grid = [model1.param_vector(f) for f in flats]
        grid = make_grid(0.0, request.horizon, request.n_steps)
        from ..covariates import empty_panel

        try:
            est = delta_min(
                model0, theta0, model1, param_grid, empty_panel(grid), request.x0,
                grid, request.n_paths, derive_rng(request.seed, DATA_STREAM),
                grid_spec={
                    "min": request.grid_min,
                    "max": request.grid_max,
                    "points": request.grid_points,
                },
            )
        except SdeBayesError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return KlResponse(estimate=est.to_dict())

    @app.post("/diagnostics/girsanov", response_model=GirsanovCheckResponse)
    def girsanov(request: GirsanovCheckRequest) -> GirsanovCheckResponse:
        config = StudyConfig(
            kind="case1",
            base_seed=request.seed,
            p=request.p,
            horizon=request.horizon,
            n_steps=request.n_steps,
            sigma0=request.sigma,
            covariate_coef_sd=request.covariate_coef_sd,
        )
        panel = generate_panel(config, derive_rng(config.base_seed, COVARIATE_STREAM))
        drift = DriftBase(request.drift)
        model0 = SdeModel(drift, _mask_from_string(request.mask0, request.p),
                          Diffusion.constant(request.sigma))
        model1 = SdeModel(drift, _mask_from_string(request.mask1, request.p),
                          Diffusion.constant(request.sigma))
        try:
            theta0 = model0.param_vector(np.asarray(request.theta0, dtype=float))
            theta1 = model1.param_vector(np.asarray(request.theta1, dtype=float))
            report = check_girsanov_identity(
                model0, theta0, theta1, request.n_paths, panel, request.x0,
                config.grid, derive_rng(request.seed, DATA_STREAM), model1=model1,
            )
        except SdeBayesError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return GirsanovCheckResponse(report=report.to_dict())

    @app.post("/market/run", response_model=MarketResponse)
    def market_run(request: MarketRequest) -> MarketResponse:
        reports = []
        try:
            for series in request.companies:
                bundle = load_series(
                    series.prices_csv, request.covariates_csv, company=series.company
                )
                report = run_company_pipeline(
                    bundle,
                    dt=request.dt,
                    seed=request.seed,
                    m_draws=request.m_draws,
                    prior_sd=request.prior_sd,
                    anneal_max_evals=request.anneal_max_evals,
                )
                reports.append(report)
        except SdeBayesError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return MarketResponse(
            reports=[r.to_dict() for r in reports],
            combined_csv=combined_table_csv(reports),
        )

    return app


app = create_app()
