import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdebayes.covariates import CovariatePanel, empty_panel, phi_values, standardize
from sdebayes.errors import DegenerateCovariateError, InvalidArgumentError
from sdebayes.grids import make_grid


def panel_from(columns, grid=None, **kw):
    columns = np.atleast_2d(np.asarray(columns, dtype=float))
    grid = grid or make_grid(0, 1, columns.shape[1] - 1)
    return CovariatePanel(grid, columns, **kw)


class TestStandardize:
    def test_hand_arithmetic(self):
        # {1,2,3}: mean 2, population variance 2/3 -> (+-sqrt(3/2), 0)
        out = standardize(panel_from([[1.0, 2.0, 3.0]]))
        expected = np.array([-np.sqrt(1.5), 0.0, np.sqrt(1.5)])
        assert np.allclose(out.columns[0], expected, atol=1e-15)
        assert out.standardized

    def test_mean_zero_var_one(self):
        rng = np.random.default_rng(0)
        out = standardize(panel_from(rng.normal(2.0, 3.0, size=(4, 101))))
        assert np.allclose(out.columns.mean(axis=1), 0.0, atol=1e-12)
        assert np.allclose(out.columns.var(axis=1), 1.0, atol=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        once = standardize(panel_from(rng.normal(size=(2, 51))))
        twice = standardize(once)
        assert np.allclose(once.columns, twice.columns, atol=1e-12)

    def test_constant_column_degenerate(self):
        with pytest.raises(DegenerateCovariateError):
            standardize(panel_from([[2.0, 2.0, 2.0]]))

    @given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_property_mean_zero_var_one(self, values):
        column = np.asarray(values)
        if column.var() <= 1e-12:
            return
        out = standardize(panel_from([column]))
        assert abs(out.columns[0].mean()) < 1e-9
        assert abs(out.columns[0].var() - 1.0) < 1e-9


class TestPanelInvariants:
    def test_standardized_flag_checked(self):
        with pytest.raises(InvalidArgumentError):
            panel_from([[1.0, 2.0, 3.0]], standardized=True)

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            panel_from([[1.0, 2.0]], grid=make_grid(0, 1, 5))

    def test_empty_panel(self):
        panel = empty_panel(make_grid(0, 1, 10))
        assert panel.p == 0


class TestPhiValues:
    def test_intercept_only(self):
        panel = empty_panel(make_grid(0, 1, 4))
        assert np.allclose(phi_values(panel, (), np.array([2.5])), 2.5)

    def test_transform_applied(self):
        panel = panel_from([[1.0, 2.0, 3.0]])
        squared = CovariatePanel(panel.grid, panel.columns, transforms=(lambda z: z**2,))
        phi = phi_values(squared, (0,), np.array([1.0, 0.5]))
        assert np.allclose(phi, 1.0 + 0.5 * np.array([1.0, 4.0, 9.0]))
