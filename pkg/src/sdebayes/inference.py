"""Priors, simulated-annealing MLE and Monte-Carlo Bayes-factor estimators.

All likelihood quantities stay in log space; exponentials only appear inside
max-shifted log-mean-exp reductions.  Because a dataset's log-likelihood for
a fixed model structure is a polynomial in the parameters (see likelihood),
the per-individual sufficient arrays are summed once into DatasetStats and
each of the m prior draws costs a few matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .covariates import CovariatePanel
from .errors import InvalidArgumentError, NumericalUnderflowError, SdeBayesError
from .grids import Path
from .likelihood import PathStats
from .models import Diffusion, ParamVector, SdeModel
from .rng import PRIOR_STREAM, derive_rng


@dataclass(frozen=True)
class Individual:
    """One observed unit: a trajectory, its covariates and its fixed diffusion."""

    id: int
    path: Path
    covariates: CovariatePanel
    diffusion: Diffusion


def model_for(individual: Individual, template: SdeModel) -> SdeModel:
    """The template model structure with this individual's diffusion."""
    return SdeModel(template.drift_base, template.covariate_mask, individual.diffusion)


@dataclass(frozen=True)
class Prior:
    """Independent normal components over a model's free parameters.

    mean and sd are ordered [xi..., beta...]; n_xi records the split so that
    draws can be reassembled into ParamVectors.
    """

    mean: np.ndarray
    sd: np.ndarray
    n_xi: int

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float)).copy()
        sd = np.atleast_1d(np.asarray(self.sd, dtype=float)).copy()
        if mean.shape != sd.shape:
            raise InvalidArgumentError("prior mean and sd must have the same length")
        if np.any(sd <= 0):
            raise InvalidArgumentError("prior sd components must be positive")
        if not 1 <= self.n_xi <= len(mean):
            raise InvalidArgumentError("n_xi out of range for prior dimension")
        mean.setflags(write=False)
        sd.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sd", sd)

    @property
    def dim(self) -> int:
        return len(self.mean)

    @staticmethod
    def for_model(model: SdeModel, mean: np.ndarray, sd: float | np.ndarray) -> "Prior":
        mean = np.asarray(mean, dtype=float)
        if np.ndim(sd) == 0:
            sd = np.full(model.n_params, float(sd))
        return Prior(mean=mean, sd=np.asarray(sd, dtype=float), n_xi=model.n_xi)


def sample_prior(prior: Prior, rng: np.random.Generator) -> ParamVector:
    """One draw from the prior, as a ParamVector."""
    flat = prior.mean + prior.sd * rng.standard_normal(prior.dim)
    return ParamVector(beta=flat[prior.n_xi :], xi=flat[: prior.n_xi])


def sample_prior_flat(prior: Prior, rng: np.random.Generator, size: int) -> np.ndarray:
    """size independent draws, flat layout, shape (size, dim)."""
    return prior.mean + prior.sd * rng.standard_normal((size, prior.dim))


class DatasetStats:
    """Summed sufficient arrays of a dataset under one model structure.

    The joint log-likelihood sum_i log f_{i,theta} equals
    p @ u_vec - 0.5 * p @ v_mat @ p with p = outer(xi, beta).ravel(), because
    the per-individual arrays add (each already carries its own diffusion).
    """

    def __init__(self, dataset: Sequence[Individual], template: SdeModel):
        if not dataset:
            raise InvalidArgumentError("dataset must be non-empty")
        self.template = template
        self.n_individuals = len(dataset)
        per_ind = [
            PathStats(ind.path, ind.covariates, model_for(ind, template)) for ind in dataset
        ]
        self.dim = per_ind[0].dim
        self.n_xi = template.n_xi
        self.u_vec = np.sum([s.u_vec for s in per_ind], axis=0)
        self.v_mat = np.sum([s.v_mat for s in per_ind], axis=0)

    def param_rows(self, flat: np.ndarray) -> np.ndarray:
        flat = np.atleast_2d(flat)
        xi = flat[:, : self.n_xi]
        beta = flat[:, self.n_xi :]
        return (xi[:, :, None] * beta[:, None, :]).reshape(flat.shape[0], self.dim)

    def log_density_batch(self, flat: np.ndarray) -> np.ndarray:
        """Joint log-likelihood at each flat parameter row."""
        p = self.param_rows(flat)
        return p @ self.u_vec - 0.5 * ((p @ self.v_mat) * p).sum(axis=1)

    def log_density(self, theta: ParamVector) -> float:
        return float(self.log_density_batch(theta.flatten()[None, :])[0])


def loglik_dataset(dataset: Sequence[Individual], template: SdeModel, theta: ParamVector) -> float:
    """sum_i log f_{i,theta} for the dataset under the template structure."""
    return DatasetStats(dataset, template).log_density(theta)


def log_mean_exp_with_se(log_weights: np.ndarray) -> tuple[float, float]:
    """log of the mean of exp(log_weights) and the delta-method SE of that log.

    Raises NumericalUnderflowError when every weight is -inf.
    """
    log_weights = np.asarray(log_weights, dtype=float)
    m = float(np.max(log_weights))
    if not np.isfinite(m):
        raise NumericalUnderflowError(max_log_weight=m)
    r = np.exp(log_weights - m)
    mean_r = float(r.mean())
    value = m + float(np.log(mean_r))
    if len(r) > 1:
        se = float(r.std(ddof=1) / (np.sqrt(len(r)) * mean_r))
    else:
        se = np.inf
    return value, se


@dataclass(frozen=True)
class AnnealConfig:
    """Simulated-annealing schedule.

    Componentwise Gaussian proposals with scale shrinking proportionally to
    the temperature; geometric cooling.  Several stages rerun the schedule
    from the best point found so far with temperature and proposal scale
    divided down, which refines along the curved ridges the multiplicative
    drift factorization produces.  The schedule is not prescribed by the
    estimation target, only by the optimization budget.
    """

    initial_temperature: float = 1.0
    cooling: float = 0.96
    iters_per_temp: int = 40
    proposal_scale: float = 0.5
    max_evals: int = 16000
    seed: int = 0
    stages: int = 4
    stage_temp_decay: float = 10.0
    stage_scale_decay: float = 4.0

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise InvalidArgumentError("cooling factor must lie in (0, 1)")
        if self.iters_per_temp < 1 or self.max_evals < 1 or self.stages < 1:
            raise InvalidArgumentError("iteration counts must be >= 1")
        if self.initial_temperature <= 0:
            raise InvalidArgumentError("initial temperature must be positive")


def anneal_maximize(
    objective: Callable[[np.ndarray], float],
    initial: np.ndarray,
    config: AnnealConfig,
) -> tuple[np.ndarray, float]:
    """Maximize objective by staged simulated annealing.

    Uphill moves are always accepted, downhill moves with probability
    exp(delta / temperature).  The best point ever visited is returned, so
    the result is never worse than the starting point.
    """
    best_x = np.asarray(initial, dtype=float).copy()
    best_f = float(objective(best_x))
    per_stage = max(1, config.max_evals // config.stages)
    for stage in range(config.stages):
        rng = derive_rng(config.seed, 0xA22EA1, stage)
        temp0 = config.initial_temperature * config.stage_temp_decay**-stage
        scale0 = config.proposal_scale * config.stage_scale_decay**-stage
        x, fx = best_x.copy(), best_f
        temperature = temp0
        evals = 0
        while evals < per_stage:
            scale = scale0 * temperature / temp0
            for _ in range(config.iters_per_temp):
                proposal = x + rng.normal(0.0, scale, size=x.shape) if scale > 0 else x.copy()
                fp = float(objective(proposal))
                evals += 1
                if fp >= fx or rng.random() < np.exp((fp - fx) / temperature):
                    x, fx = proposal, fp
                    if fx > best_f:
                        best_x, best_f = x.copy(), fx
                if evals >= per_stage:
                    break
            temperature *= config.cooling
    return best_x, best_f


def mle_simulated_annealing(
    dataset: Sequence[Individual],
    template: SdeModel,
    config: AnnealConfig,
    initial: np.ndarray | None = None,
) -> ParamVector:
    """Best-so-far maximizer of the dataset log-likelihood under the template."""
    if not dataset:
        raise InvalidArgumentError("dataset must be non-empty")
    stats = DatasetStats(dataset, template)
    if initial is None:
        initial = np.zeros(template.n_params)
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (template.n_params,):
        raise InvalidArgumentError(
            f"initial point must have {template.n_params} coordinates"
        )

    def objective(flat: np.ndarray) -> float:
        value = stats.log_density_batch(flat[None, :])[0]
        if not np.isfinite(value):
            raise SdeBayesError(f"log-likelihood not finite at theta={flat.tolist()}")
        return float(value)

    best, _ = anneal_maximize(objective, initial, config)
    return template.param_vector(best)


@dataclass(frozen=True)
class MarginalEstimate:
    value: float
    se: float
    m_draws: int
    norm: float


@dataclass(frozen=True)
class BayesFactorEstimate:
    """A normalized Monte-Carlo log Bayes factor with its standard error."""

    log_value: float
    mc_se: float
    m_draws: int
    norm: float
    norm_label: str = ""


def log_marginal_likelihood(
    dataset: Sequence[Individual],
    template: SdeModel,
    prior: Prior,
    m_draws: int,
    rng: np.random.Generator,
    norm: float | None = None,
) -> MarginalEstimate:
    """(1/norm) * log of the prior-averaged joint likelihood.

    Plain prior Monte Carlo: theta_j ~ prior, reduced with log-sum-exp.
    norm defaults to the number of individuals.
    """
    if m_draws < 2:
        raise InvalidArgumentError("m_draws must be at least 2")
    stats = DatasetStats(dataset, template)
    draws = sample_prior_flat(prior, rng, m_draws)
    log_w = stats.log_density_batch(draws)
    value, se = log_mean_exp_with_se(log_w)
    norm = float(norm if norm is not None else len(dataset))
    return MarginalEstimate(value=value / norm, se=se / norm, m_draws=m_draws, norm=norm)


def log_bayes_factor_fixed_truth(
    dataset: Sequence[Individual],
    model1: SdeModel,
    prior1: Prior,
    theta0: ParamVector,
    model0: SdeModel,
    m_draws: int,
    rng: np.random.Generator,
    norm: float | None = None,
) -> BayesFactorEstimate:
    """(1/norm) * log of the prior-averaged likelihood ratio against fixed theta0."""
    if m_draws < 2:
        raise InvalidArgumentError("m_draws must be at least 2")
    stats1 = DatasetStats(dataset, model1)
    stats0 = DatasetStats(dataset, model0)
    log_f0 = stats0.log_density(theta0)
    draws = sample_prior_flat(prior1, rng, m_draws)
    log_w = stats1.log_density_batch(draws) - log_f0
    value, se = log_mean_exp_with_se(log_w)
    norm = float(norm if norm is not None else len(dataset))
    return BayesFactorEstimate(
        log_value=value / norm, mc_se=se / norm, m_draws=m_draws, norm=norm
    )


@dataclass(frozen=True)
class AveragedEstimate:
    mean: float
    se: float
    per_replication: np.ndarray
    n_failures: int


def averaged_log_bf(
    truth_generator: Callable[[int], tuple[Sequence[Individual], SdeModel, ParamVector]],
    model1: SdeModel,
    prior1: Prior | Callable[[Sequence[Individual]], Prior],
    replications: int,
    rng: np.random.Generator,
    m_draws: int = 10000,
    norm: float | None = None,
    max_failure_fraction: float = 0.01,
) -> AveragedEstimate:
    """Average of the normalized log Bayes factor over independent datasets.

    truth_generator(r) must return (dataset, model0, theta0) for replication r,
    freshly simulated under the truth.  prior1 may be a fixed Prior or a
    callable building one from each replication's dataset (e.g. MLE-centered).
    Replication failures are tolerated up to max_failure_fraction of the runs.
    """
    if replications < 2:
        raise InvalidArgumentError("replications must be at least 2")
    streams = rng.spawn(replications)
    values = []
    failures = 0
    for r in range(replications):
        try:
            dataset, model0, theta0 = truth_generator(r)
            prior = prior1(dataset) if callable(prior1) else prior1
            est = log_bayes_factor_fixed_truth(
                dataset, model1, prior, theta0, model0, m_draws, streams[r], norm=norm
            )
            values.append(est.log_value)
        except SdeBayesError:
            failures += 1
    if failures > max_failure_fraction * replications:
        raise SdeBayesError(
            f"{failures}/{replications} replications failed (> {max_failure_fraction:.0%})"
        )
    values = np.asarray(values)
    return AveragedEstimate(
        mean=float(values.mean()),
        se=float(values.std(ddof=1) / np.sqrt(len(values))),
        per_replication=values,
        n_failures=failures,
    )


def per_individual_marginal(
    dataset: Sequence[Individual],
    models: Sequence[SdeModel],
    priors: Sequence[Prior],
    m_draws: int,
    base_seed: int,
    norm: float | None = None,
) -> BayesFactorEstimate:
    """(1/norm) * sum_i log of the per-individual prior-averaged likelihoods.

    Draw streams are keyed by individual id (not position), so the value for
    any subset of individuals decomposes exactly into single-individual runs,
    and two calls with identical models and priors are bit-identical.
    """
    n = len(dataset)
    if not (len(models) == len(priors) == n):
        raise InvalidArgumentError("per-individual lists must align with the dataset")
    total = 0.0
    var_total = 0.0
    for i, ind in enumerate(dataset):
        stats = DatasetStats([ind], models[i])
        rng_i = derive_rng(base_seed, PRIOR_STREAM, ind.id)
        log_w = stats.log_density_batch(sample_prior_flat(priors[i], rng_i, m_draws))
        value, se = log_mean_exp_with_se(log_w)
        total += value
        var_total += se**2
    norm = float(norm if norm is not None else n)
    return BayesFactorEstimate(
        log_value=total / norm,
        mc_se=float(np.sqrt(var_total)) / norm,
        m_draws=m_draws,
        norm=norm,
    )


def per_individual_log_bf(
    dataset: Sequence[Individual],
    models1: Sequence[SdeModel],
    priors1: Sequence[Prior],
    models0: Sequence[SdeModel],
    theta0s: Sequence[ParamVector] | None = None,
    priors0: Sequence[Prior] | None = None,
    m_draws: int = 10000,
    base_seed: int = 0,
    norm: float | None = None,
) -> BayesFactorEstimate:
    """Per-individual marginal ratios, combined as (1/norm) * sum of logs.

    Each individual gets its own candidate model and prior; the denominator is
    either the fixed true density (theta0s) or a per-individual marginal under
    priors0.  Both sides share the same per-individual draw streams, so a
    candidate identical to the denominator model yields exactly zero.
    """
    n = len(dataset)
    if not (len(models1) == len(priors1) == len(models0) == n):
        raise InvalidArgumentError("per-individual lists must align with the dataset")
    if (theta0s is None) == (priors0 is None):
        raise InvalidArgumentError("provide exactly one of theta0s or priors0")
    norm = float(norm if norm is not None else n)
    numerator = per_individual_marginal(dataset, models1, priors1, m_draws, base_seed, norm=1.0)
    if theta0s is not None:
        den = sum(
            DatasetStats([ind], models0[i]).log_density(theta0s[i])
            for i, ind in enumerate(dataset)
        )
        den_se = 0.0
    else:
        denominator = per_individual_marginal(
            dataset, models0, priors0, m_draws, base_seed, norm=1.0
        )
        den, den_se = denominator.log_value, denominator.mc_se
    return BayesFactorEstimate(
        log_value=(numerator.log_value - den) / norm,
        mc_se=float(np.hypot(numerator.mc_se, den_se)) / norm,
        m_draws=m_draws,
        norm=norm,
    )
