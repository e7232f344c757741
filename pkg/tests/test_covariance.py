import logging
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import integrate

from common.errors import DimensionMismatch, InvalidArgument, SingularGamma
from common.factory import CovarianceFactory
from common.feqr_config import BandwidthRule, CiMethod, DgpConfig, KernelSpec, RateTag
from common.panel import PanelData
from common.sandwich import sandwich
from estimators.covariance import (
    RobustCovariance,
    StandardCovariance,
    density_and_gamma,
    gamma_matrix_hat,
    kernel_weight,
    m_hat,
    omega_hat,
    robust_covariance,
    sigma_hat,
    silverman_bandwidth,
    standard_covariance,
)
from estimators.solver import fit_feqr
from simulation.dgp import generate_panel, population_covariance
from tests.conftest import random_panel


def normal_density(u):
    return math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)


def unit_sd_sample(size, seed=0):
    values = np.random.default_rng(seed).normal(size=size)
    return (values - values.mean()) / values.std(ddof=1)


class TestKernelWeight:
    @pytest.mark.parametrize(
        "u, h, expected", [(0.0, 1.0, 0.3989422804), (0.0, 2.0, 0.1994711402), (1.0, 1.0, 0.2419707245)]
    )
    def test_values(self, u, h, expected):
        assert kernel_weight(u, KernelSpec(h)) == pytest.approx(expected, abs=1e-10)

    def test_matches_density_oracle(self):
        spec = KernelSpec(0.7)
        for u in np.linspace(-3, 3, 13):
            assert kernel_weight(u, spec) == pytest.approx(normal_density(u / 0.7) / 0.7, rel=1e-12)

    def test_integrates_to_one(self):
        grid = np.linspace(-8, 8, 16001)
        area = integrate.trapezoid(kernel_weight(grid, KernelSpec(1.0)), grid)
        assert abs(area - 1.0) < 1e-6


class TestSilvermanBandwidth:
    def test_unit_sd(self):
        resid = unit_sd_sample(200)
        assert silverman_bandwidth(resid, 1000) == pytest.approx(1.06 * 1000 ** (-0.2))

    def test_floor(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert silverman_bandwidth(0.01 * unit_sd_sample(200), 1000) == 0.05
        assert "below the floor" in caplog.text

    def test_single_unit(self):
        assert silverman_bandwidth(unit_sd_sample(50), 1) == pytest.approx(1.06)

    def test_pooled_rule(self):
        resid = unit_sd_sample(200).reshape(20, 10)
        value = silverman_bandwidth(resid, 20, BandwidthRule.SILVERMAN_NT)
        assert value == pytest.approx(1.06 * 200 ** (-0.2))

    def test_degenerate_residuals(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert silverman_bandwidth(np.zeros(10), 5) == 0.05
        assert "DegenerateResiduals" in caplog.text

    def test_too_few_values(self):
        with pytest.raises(InvalidArgument):
            silverman_bandwidth(np.array([1.0]), 1)


class TestDensityAndGamma:
    def test_zero_residuals(self, small_panel):
        f, gamma = density_and_gamma(small_panel, np.zeros((4, 6)), KernelSpec(1.0))
        assert_allclose(f, np.full(4, 0.3989422804014327))
        assert_allclose(gamma, small_panel.x.mean(axis=1))

    def test_single_period(self):
        panel = random_panel(2, 3, 1)
        resid = np.array([[0.3], [-1.0], [2.0]])
        f, gamma = density_and_gamma(panel, resid, KernelSpec(0.5))
        assert_allclose(f, kernel_weight(resid[:, 0], KernelSpec(0.5)))
        assert_allclose(gamma, panel.x[:, 0, :])

    def test_double_loop(self):
        panel = random_panel(5, 3, 4, 2)
        resid = np.random.default_rng(5).normal(size=(3, 4))
        f, gamma = density_and_gamma(panel, resid, KernelSpec(0.4))
        for i in range(3):
            weights = [normal_density(resid[i, t] / 0.4) / 0.4 for t in range(4)]
            f_i = sum(weights) / 4
            assert f[i] == pytest.approx(f_i, rel=1e-12)
            for k in range(2):
                weighted = sum(weights[t] * panel.x[i, t, k] for t in range(4))
                assert gamma[i, k] == pytest.approx(weighted / (f_i * 4), rel=1e-12)

    def test_shape_check(self, small_panel):
        with pytest.raises(DimensionMismatch):
            density_and_gamma(small_panel, np.zeros((4, 5)), KernelSpec(1.0))


class TestMHat:
    def test_centered_regressors_vanish(self, small_panel):
        gamma = small_panel.x[:, 0, :]
        flat = PanelData(y=small_panel.y, x=np.repeat(gamma[:, np.newaxis, :], 6, axis=1))
        rows, mean = m_hat(flat, small_panel.y, gamma, 0.5)
        assert_array_equal(rows, np.zeros((6, 1)))
        assert_array_equal(mean, [0.0])

    def test_positive_residuals(self, small_panel):
        gamma = np.full((4, 1), 0.2)
        rows, _ = m_hat(small_panel, np.ones((4, 6)), gamma, 0.3)
        assert_allclose(rows, 0.3 * (small_panel.x - 0.2).mean(axis=0))

    def test_double_loop(self):
        panel = random_panel(8, 2, 2)
        resid = np.array([[0.5, -0.1], [0.0, 2.0]])
        gamma = np.array([[0.3], [-0.4]])
        rows, mean = m_hat(panel, resid, gamma, 0.25)
        for t in range(2):
            expected = sum(
                (0.25 - (resid[i, t] <= 0)) * (panel.x[i, t, 0] - gamma[i, 0]) for i in range(2)
            ) / 2
            assert rows[t, 0] == pytest.approx(expected, rel=1e-14)
        assert mean[0] == pytest.approx(rows[:, 0].mean(), rel=1e-14)

    def test_dimension_mismatch(self, small_panel):
        with pytest.raises(DimensionMismatch):
            m_hat(small_panel, np.zeros((4, 6)), np.zeros((3, 1)), 0.5)


class TestSigmaHat:
    def test_single_row(self):
        assert_array_equal(sigma_hat(np.array([[1.0, 2.0]]), np.array([1.0, 2.0])), np.zeros((2, 2)))

    def test_opposite_rows(self):
        a = np.array([1.5, -0.5])
        assert_allclose(sigma_hat(np.vstack([a, -a]), np.zeros(2)), np.outer(a, a))

    def test_matches_moment_expansion(self):
        rows = np.random.default_rng(3).normal(size=(5, 2))
        mean = rows.mean(axis=0)
        expanded = rows.T @ rows / 5 - np.outer(mean, mean)
        result = sigma_hat(rows, mean)
        assert_allclose(result, expanded, rtol=1e-10)
        assert_array_equal(result, result.T)
        assert np.linalg.eigvalsh(result).min() >= -1e-12 * np.trace(result)


class TestGammaMatrixHat:
    def test_zero_regressors(self):
        panel = PanelData(y=np.ones((2, 3)), x=np.zeros((2, 3, 2)))
        result = gamma_matrix_hat(panel, np.zeros((2, 3)), np.zeros((2, 2)), KernelSpec(1.0))
        assert_array_equal(result, np.zeros((2, 2)))

    def test_constant_within_unit(self):
        x = np.repeat(np.array([[1.0], [2.0]])[:, np.newaxis, :], 3, axis=1)
        panel = PanelData(y=np.zeros((2, 3)), x=x)
        result = gamma_matrix_hat(panel, np.zeros((2, 3)), x[:, 0, :], KernelSpec(1.0))
        assert_array_equal(result, np.zeros((1, 1)))

    def test_double_loop(self):
        panel = random_panel(6, 3, 3, 2)
        resid = np.random.default_rng(6).normal(size=(3, 3))
        gamma = np.random.default_rng(7).normal(size=(3, 2))
        result = gamma_matrix_hat(panel, resid, gamma, KernelSpec(0.8))
        expected = np.zeros((2, 2))
        for i in range(3):
            for t in range(3):
                weight = normal_density(resid[i, t] / 0.8) / 0.8
                expected += weight * np.outer(panel.x[i, t], panel.x[i, t] - gamma[i])
        assert_allclose(result, expected / 9, rtol=1e-12)


class TestOmegaHat:
    def test_constant_squared_deviation(self):
        x = np.array([[[1.0], [3.0]], [[-1.0], [1.0]]])
        panel = PanelData(y=np.zeros((2, 2)), x=x)
        result = omega_hat(panel, np.array([[2.0], [0.0]]), 0.5)
        assert_allclose(result, [[0.25]])


class TestSandwich:
    def test_scalar(self):
        assert_allclose(sandwich(np.array([[2.0]]), np.array([[3.0]])), [[0.75]])

    def test_singular_bread(self):
        with pytest.raises(SingularGamma):
            sandwich(np.array([[1.0, 1.0], [1.0, 1.0]]), np.eye(2))

    def test_ill_conditioned_bread(self):
        with pytest.raises(SingularGamma) as excinfo:
            sandwich(np.diag([1.0, 1e-13]), np.eye(2))
        assert excinfo.value.condition_number > 1e12


class TestEstimators:
    @pytest.fixture(scope="class")
    def fitted(self, dgp_panel):
        return dgp_panel, fit_feqr(dgp_panel, 0.5)

    def test_robust(self, fitted):
        panel, fit = fitted
        cov = robust_covariance(panel, fit)
        assert cov.rate is RateTag.ROBUST_SQRT_T
        assert cov.method is CiMethod.ROBUST
        assert np.all(cov.f_i_hat > 0)
        assert_array_equal(cov.v_hat, cov.v_hat.T)
        assert np.linalg.eigvalsh(cov.v_hat).min() >= -1e-12 * np.trace(cov.v_hat)
        assert_array_equal(cov.middle_matrix, cov.sigma_hat)
        bread = (cov.gamma_mat_hat + cov.gamma_mat_hat.T) / 2
        assert_allclose(cov.v_hat, cov.sigma_hat / bread**2, rtol=1e-12)

    def test_standard(self, fitted):
        panel, fit = fitted
        cov = standard_covariance(panel, fit)
        assert cov.rate is RateTag.STANDARD_SQRT_NT
        assert_allclose(cov.middle_matrix, omega_hat(panel, cov.gamma_i_hat, 0.5))
        assert np.linalg.eigvalsh(cov.v_hat).min() >= 0.0

    def test_silverman_default(self, fitted):
        panel, fit = fitted
        cov = robust_covariance(panel, fit)
        assert cov.bandwidth == pytest.approx(silverman_bandwidth(fit.residuals, panel.n_units))

    def test_fixed_kernel(self, fitted):
        panel, fit = fitted
        cov = robust_covariance(panel, fit, spec=KernelSpec(0.3))
        assert cov.bandwidth == 0.3
        assert not cov.bandwidth_floored

    def test_factory(self, fitted):
        panel, fit = fitted
        assert set(CovarianceFactory.get_methods()) >= {CiMethod.ROBUST, CiMethod.STANDARD}
        assert isinstance(CovarianceFactory.create(CiMethod.ROBUST, panel, fit), RobustCovariance)
        assert isinstance(CovarianceFactory.create(CiMethod.STANDARD, panel, fit), StandardCovariance)

    def test_factory_rejects_non_estimator(self):
        with pytest.raises(ValueError):
            CovarianceFactory.register({CiMethod.ROBUST: dict})

    def test_singular_gamma_is_logged(self, fitted, caplog):
        panel, fit = fitted
        zero = PanelData(y=panel.y, x=np.zeros_like(panel.x))
        with caplog.at_level(logging.ERROR), pytest.raises(SingularGamma):
            robust_covariance(zero, fit)
        assert "robust covariance" in caplog.text


def assert_symmetric_psd(matrix):
    assert_array_equal(matrix, matrix.T)
    assert np.linalg.eigvalsh(matrix).min() >= -1e-12 * max(np.trace(matrix), 1e-300)


class TestRandomInstances:
    @pytest.mark.parametrize("seed", range(100))
    def test_covariance_properties(self, seed):
        n_units, n_periods, n_regressors = 3 + seed % 4, 5 + seed % 5, 1 + seed % 2
        panel = random_panel(300 + seed, n_units, n_periods, n_regressors)
        fit = fit_feqr(panel, (0.25, 0.5, 0.75)[seed % 3])
        cov = robust_covariance(panel, fit)

        assert_symmetric_psd(cov.sigma_hat)
        assert_symmetric_psd(cov.v_hat)

        h = cov.bandwidth
        expected = np.zeros((n_regressors, n_regressors))
        scale = 0.0
        for i in range(n_units):
            for t in range(n_periods):
                weight = normal_density(fit.residuals[i, t] / h) / h
                term = weight * np.outer(panel.x[i, t], panel.x[i, t] - cov.gamma_i_hat[i])
                expected += term
                scale += np.abs(term).max()
        total = n_units * n_periods
        assert_allclose(cov.gamma_mat_hat, expected / total, rtol=1e-12, atol=1e-12 * scale / total)


class TestPopulationRegimes:
    @pytest.mark.slow
    def test_robust_estimate_is_consistent(self):
        dgp = DgpConfig(n_units=2000, n_periods=2000, base_seed=31)
        panel = generate_panel(dgp, 0)
        fit = fit_feqr(panel, 0.5)
        _, _, v_population = population_covariance(dgp, 0.5)
        v_hat = robust_covariance(
            panel, fit, bandwidth_rule=BandwidthRule.SILVERMAN_NT
        ).v_hat[0, 0]
        assert abs(v_hat / v_population - 1.0) < 0.10

    @pytest.mark.slow
    def test_independent_errors_stabilize_at_rate_n(self):
        scaled = []
        for n_units in (400, 800):
            dgp = DgpConfig(n_units=n_units, n_periods=400, common_shock=False, base_seed=47)
            panel = generate_panel(dgp, 0)
            fit = fit_feqr(panel, 0.5)
            scaled.append(n_units * robust_covariance(panel, fit).v_hat[0, 0])
        assert abs(scaled[1] / scaled[0] - 1.0) < 0.25
