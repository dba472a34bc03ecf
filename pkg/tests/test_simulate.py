import numpy as np
import pytest

from sdebayes.covariates import empty_panel
from sdebayes.errors import SimulationDivergedError
from sdebayes.grids import make_grid
from sdebayes.models import CovariateSdeSpec, Diffusion, DriftBase, ParamVector, SdeModel
from sdebayes.simulate import simulate_covariates, simulate_path, simulate_paths

AFFINE = DriftBase("affine")


def intercept_model(sigma):
    return SdeModel(AFFINE, (), Diffusion.constant(sigma))


class TestSimulatePath:
    def test_no_dynamics_constant_path(self):
        grid = make_grid(0, 1, 100)
        model = intercept_model(0.0)
        theta = ParamVector(beta=[0.0, 0.0], xi=[0.0])
        path = simulate_path(model, theta, empty_panel(grid), 3.0, grid, np.random.default_rng(0))
        assert np.all(path.values == 3.0)

    def test_ode_limit_matches_exponential(self):
        # sigma = 0, drift -x: exact solution exp(-t); Euler error is O(dt)
        theta = ParamVector(beta=[0.0, -1.0], xi=[1.0])
        model = intercept_model(0.0)
        errors = {}
        for n in (500, 1000):
            grid = make_grid(0, 1, n)
            path = simulate_path(model, theta, empty_panel(grid), 1.0, grid, np.random.default_rng(0))
            errors[n] = abs(path.values[-1] - np.exp(-1.0))
        assert errors[500] < 2e-3
        # first-order convergence: halving dt shrinks the error by >= 1.9
        assert errors[500] / errors[1000] >= 1.9

    def test_ou_monte_carlo_mean(self):
        # OU with rate 1: E X(1) = x0 * exp(-1); oracle is the exact mean
        grid = make_grid(0, 1, 200)
        model = intercept_model(1.0)
        theta = ParamVector(beta=[0.0, -1.0], xi=[1.0])
        values = simulate_paths(
            model, theta, empty_panel(grid), 1.0, grid, np.random.default_rng(42), 10**4
        )
        terminal = values[:, -1]
        se = terminal.std(ddof=1) / np.sqrt(len(terminal))
        assert abs(terminal.mean() - np.exp(-1.0)) <= 3 * se + 2e-3  # small O(dt) bias

    def test_deterministic_given_seed(self):
        grid = make_grid(0, 1, 50)
        model = intercept_model(2.0)
        theta = ParamVector(beta=[0.1, -0.5], xi=[1.0])
        a = simulate_path(model, theta, empty_panel(grid), 0.0, grid, np.random.default_rng(9))
        b = simulate_path(model, theta, empty_panel(grid), 0.0, grid, np.random.default_rng(9))
        assert np.array_equal(a.values, b.values)

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergence_reports_step(self):
        # explosive deterministic drift x' = x^ ... use large linear rate with big dt
        grid = make_grid(0, 10, 10)
        model = intercept_model(0.0)
        theta = ParamVector(beta=[0.0, 1e200], xi=[1.0])
        with pytest.raises(SimulationDivergedError) as err:
            simulate_path(model, theta, empty_panel(grid), 1.0, grid, np.random.default_rng(0))
        assert err.value.step >= 1


class TestSimulateCovariates:
    def test_zero_drift_is_brownian(self):
        grid = make_grid(0, 1, 100)
        specs = [CovariateSdeSpec("affine", (0.0, 0.0)), CovariateSdeSpec("constant", (0.0,))]
        panel = simulate_covariates(specs, grid, np.random.default_rng(3))
        assert panel.p == 2
        assert np.all(panel.columns[:, 0] == 0.0)
        # each column is the running sum of its N(0, dt) increments
        increments = np.diff(panel.columns, axis=1)
        se = np.sqrt(2.0 / (increments.size - 1)) * grid.dt
        assert abs(increments.var(ddof=1) - grid.dt) <= 30 * se  # loose: only 200 draws

    def test_constant_drift_zero_noise_is_time(self):
        grid = make_grid(0, 1, 500)
        spec = CovariateSdeSpec("constant", (1.0,), noise_scale=0.0)
        panel = simulate_covariates([spec], grid, np.random.default_rng(0))
        assert np.allclose(panel.columns[0], grid.points(), atol=1e-12)

    def test_small_coefficient_specs_finite(self):
        rng = np.random.default_rng(10)
        coef = rng.normal(0.0, 0.01, size=4)
        specs = [
            CovariateSdeSpec("affine", (coef[0], coef[1])),
            CovariateSdeSpec("constant", (coef[2],)),
            CovariateSdeSpec("linear", (coef[3],)),
        ]
        panel = simulate_covariates(specs, make_grid(0, 1, 500), rng)
        assert np.all(np.isfinite(panel.columns))

    def test_average_shrinks_like_one_over_n(self):
        # empirical form of the limiting-average assumption: across n iid
        # individuals, the mean covariate value at a fixed grid point has
        # variance ~ 1/n.  Brownian covariates built from Wiener increments
        # and standardized over time, vectorized across individuals.
        from sdebayes.grids import sample_wiener_increments

        grid = make_grid(0, 1, 100)
        k = 50
        n_reps = 100
        variances = {}
        for n in (10, 100, 1000):
            rng = np.random.default_rng(5000 + n)
            dw = sample_wiener_increments(grid, rng, n_paths=n_reps * n)
            z = np.concatenate([np.zeros((n_reps * n, 1)), np.cumsum(dw, axis=1)], axis=1)
            z = (z - z.mean(axis=1, keepdims=True)) / z.std(axis=1, keepdims=True)
            means = z[:, k].reshape(n_reps, n).mean(axis=1)
            variances[n] = means.var(ddof=1)
        assert 4 < variances[10] / variances[100] < 25
        assert 4 < variances[100] / variances[1000] < 25
