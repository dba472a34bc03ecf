"""Drift families, fixed diffusions and the covariate-multiplicative SDE model.

The modeled dynamics are

    dX(t) = phi_xi(z(t)) * b_beta(X(t)) dt + sigma(X(t)) dW(t)

with phi_xi(z) = xi_0 + sum over active covariates of xi_l * g_l(z_l), a drift
base b_beta from a small parametric family, and a diffusion sigma that is fixed
(never estimated).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

# Divisions by sigma^2 in likelihood computations are refused below this floor.
SIGMA_FLOOR = 1e-8

DRIFT_FORMS = ("affine", "constant", "linear")


@dataclass(frozen=True)
class DriftBase:
    """One-dimensional drift base b_beta(x).

    Forms: "affine" b(x) = beta0 + beta1*x, "constant" b(x) = beta0,
    "linear" b(x) = beta0*x.  All are linear in beta, which the likelihood
    code exploits through the design-row representation b(x) = design(x) @ beta.
    """

    form: str

    def __post_init__(self):
        if self.form not in DRIFT_FORMS:
            raise InvalidArgumentError(f"unknown drift form {self.form!r}")

    @property
    def n_params(self) -> int:
        return 2 if self.form == "affine" else 1

    def design(self, x: np.ndarray) -> np.ndarray:
        """Design matrix D with b(x_k) = D[k] @ beta, shape (len(x), n_params)."""
        x = np.asarray(x, dtype=float)
        if self.form == "affine":
            return np.stack([np.ones_like(x), x], axis=-1)
        if self.form == "constant":
            return np.ones_like(x)[..., None]
        return x[..., None]

    def __call__(self, x: np.ndarray, beta: np.ndarray) -> np.ndarray:
        return self.design(x) @ np.asarray(beta, dtype=float)


@dataclass(frozen=True)
class Diffusion:
    """Fixed diffusion coefficient sigma(x): constant c or power a*|x|**b.

    The power form uses |x| so that Euler excursions below zero stay defined;
    market data is validated to be strictly positive before it gets here.
    """

    kind: str
    c: float = 1.0
    a: float = 1.0
    b: float = 0.5

    def __post_init__(self):
        if self.kind not in ("constant", "power"):
            raise InvalidArgumentError(f"unknown diffusion kind {self.kind!r}")

    @staticmethod
    def constant(c: float) -> "Diffusion":
        return Diffusion(kind="constant", c=float(c))

    @staticmethod
    def power(a: float, b: float) -> "Diffusion":
        return Diffusion(kind="power", a=float(a), b=float(b))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.c)
        return self.a * np.abs(x) ** self.b


@dataclass(frozen=True)
class SdeModel:
    """Drift base + covariate inclusion mask + fixed diffusion.

    covariate_mask has one boolean per available covariate; the intercept
    xi_0 is always active.  sigma is fixed per model (per individual in the
    studies, where the diffusion constants differ across individuals).
    """

    drift_base: DriftBase
    covariate_mask: tuple[bool, ...]
    diffusion: Diffusion

    def __post_init__(self):
        object.__setattr__(self, "covariate_mask", tuple(bool(m) for m in self.covariate_mask))

    @property
    def p(self) -> int:
        return len(self.covariate_mask)

    @property
    def active_indices(self) -> tuple[int, ...]:
        return tuple(l for l, on in enumerate(self.covariate_mask) if on)

    @property
    def n_xi(self) -> int:
        """Length of xi: intercept plus one coefficient per active covariate."""
        return 1 + sum(self.covariate_mask)

    @property
    def n_beta(self) -> int:
        return self.drift_base.n_params

    @property
    def n_params(self) -> int:
        return self.n_xi + self.n_beta

    def with_sigma(self, sigma: float) -> "SdeModel":
        return SdeModel(self.drift_base, self.covariate_mask, Diffusion.constant(sigma))

    def with_mask(self, mask) -> "SdeModel":
        return SdeModel(self.drift_base, tuple(mask), self.diffusion)

    def param_vector(self, flat: np.ndarray) -> "ParamVector":
        """Split a flat [xi..., beta...] vector into a ParamVector."""
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise InvalidArgumentError(
                f"expected {self.n_params} parameters, got shape {flat.shape}"
            )
        return ParamVector(beta=flat[self.n_xi:], xi=flat[: self.n_xi])


@dataclass(frozen=True)
class ParamVector:
    """Parameters theta = (beta, xi) for one model.

    xi is ordered [xi_0, xi_l for active l in mask order]; beta holds the
    drift-base coefficients.  flatten() emits [xi..., beta...], matching the
    covariate-first layout used by priors and annealing.
    """

    beta: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float)).copy()
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float)).copy()
        beta.setflags(write=False)
        xi.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "xi", xi)

    def validate_for(self, model: SdeModel) -> None:
        if len(self.xi) != model.n_xi:
            raise InvalidArgumentError(
                f"xi has length {len(self.xi)}, model expects {model.n_xi}"
            )
        if len(self.beta) != model.n_beta:
            raise InvalidArgumentError(
                f"beta has length {len(self.beta)}, model expects {model.n_beta}"
            )

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.xi, self.beta])


@dataclass(frozen=True)
class CovariateSdeSpec:
    """Scalar SDE driving one covariate: dz = drift(z) dt + noise_scale dW.

    Unit diffusion by default; noise_scale=0 is a test hook that turns the
    column into a deterministic integral.
    """

    form: str
    coefficients: tuple[float, ...]
    noise_scale: float = 1.0

    def __post_init__(self):
        drift = DriftBase(self.form)
        if len(self.coefficients) != drift.n_params:
            raise InvalidArgumentError(
                f"{self.form} drift takes {drift.n_params} coefficients, "
                f"got {len(self.coefficients)}"
            )
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    def drift(self, z: np.ndarray) -> np.ndarray:
        return DriftBase(self.form)(z, np.array(self.coefficients))
