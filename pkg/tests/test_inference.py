import logging
import math
from types import SimpleNamespace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from common.base_covariance import CovarianceEstimate
from common.errors import InvalidArgument, NegativeVariance
from common.feqr_config import CiMethod, RateTag
from common.qrcore import ParameterPoint
from estimators.covariance import robust_covariance
from estimators.inference import confidence_intervals, normal_quantile, std_errors
from estimators.solver import fit_feqr


def normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def estimate_with(v_hat, rate=RateTag.ROBUST_SQRT_T, method=CiMethod.ROBUST):
    v_hat = np.atleast_2d(np.asarray(v_hat, dtype=float))
    p = v_hat.shape[0]
    return CovarianceEstimate(
        sigma_hat=np.zeros((p, p)),
        gamma_mat_hat=np.eye(p),
        gamma_i_hat=np.zeros((1, p)),
        f_i_hat=np.ones(1),
        v_hat=v_hat,
        rate=rate,
        bandwidth=0.1,
        method=method,
        middle_matrix=np.zeros((p, p)),
    )


def fit_with(beta, n_units, n_periods):
    return SimpleNamespace(
        theta=ParameterPoint(alpha=np.zeros(n_units), beta=beta),
        residuals=np.zeros((n_units, n_periods)),
    )


class TestNormalQuantile:
    @pytest.mark.parametrize(
        "prob, expected", [(0.5, 0.0), (0.975, 1.959963984540054), (0.75, 0.6744897501960817)]
    )
    def test_values(self, prob, expected):
        assert normal_quantile(prob) == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("prob", [0.0, 1.0, -0.2, 1.2])
    def test_outside_unit_interval(self, prob):
        with pytest.raises(InvalidArgument):
            normal_quantile(prob)

    def test_inverts_cdf(self):
        for x in np.linspace(-6, 6, 1002)[1:-1]:
            prob = normal_cdf(x)
            # above the median prob itself carries rounding of size spacing(prob)
            density = math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
            tolerance = 1e-8 + 2 * np.spacing(prob) / density
            assert abs(normal_quantile(prob) - x) <= tolerance


class TestStdErrors:
    def test_robust_rate(self):
        assert_allclose(std_errors(estimate_with(4.0), 100, 100), [0.2])

    def test_standard_rate(self):
        cov = estimate_with(4.0, RateTag.STANDARD_SQRT_NT, CiMethod.STANDARD)
        assert_allclose(std_errors(cov, 100, 100), [0.02])

    def test_zero_variance(self):
        assert_allclose(std_errors(estimate_with(0.0), 10, 10), [0.0])

    def test_negative_variance(self):
        with pytest.raises(NegativeVariance) as excinfo:
            std_errors(estimate_with(np.diag([1.0, -0.5])), 10, 10)
        assert excinfo.value.index == 1

    def test_tiny_negative_is_clamped(self, caplog):
        with caplog.at_level(logging.WARNING):
            errors = std_errors(estimate_with(np.diag([1.0, -1e-14])), 10, 10)
        assert errors[1] == 0.0
        assert "Clamping" in caplog.text


class TestConfidenceIntervals:
    def test_ninety_five_percent(self):
        (ci,) = confidence_intervals(fit_with([1.0], 5, 100), estimate_with(4.0), 0.95)
        assert ci.std_error == pytest.approx(0.2)
        assert ci.lower == pytest.approx(0.608, abs=1e-3)
        assert ci.upper == pytest.approx(1.392, abs=1e-3)
        assert ci.width == pytest.approx(2 * 1.959963984540054 * 0.2)
        assert ci.method is CiMethod.ROBUST
        assert ci.contains(1.3) and not ci.contains(1.4)

    def test_half_level(self):
        (ci,) = confidence_intervals(fit_with([0.0], 5, 100), estimate_with(4.0), 0.5)
        assert ci.upper == pytest.approx(0.6744897501960817 * 0.2)

    def test_degenerate(self):
        (ci,) = confidence_intervals(fit_with([1.5], 5, 100), estimate_with(0.0))
        assert ci.lower == ci.upper == 1.5
        assert ci.degenerate

    def test_nesting_and_symmetry(self):
        fit = fit_with([0.3, -1.0], 4, 25)
        cov = estimate_with(np.array([[2.0, 0.3], [0.3, 1.0]]))
        narrow = confidence_intervals(fit, cov, 0.8)
        wide = confidence_intervals(fit, cov, 0.99)
        for a, b in zip(narrow, wide):
            assert b.lower < a.lower < a.estimate < a.upper < b.upper
            assert (a.lower + a.upper) / 2 == pytest.approx(a.estimate)

    def test_invalid_level(self):
        with pytest.raises(InvalidArgument):
            confidence_intervals(fit_with([1.0], 2, 3), estimate_with(1.0), 1.0)

    def test_fitted_panel(self, dgp_panel):
        fit = fit_feqr(dgp_panel, 0.5)
        (ci,) = confidence_intervals(fit, robust_covariance(dgp_panel, fit))
        assert ci.lower < fit.beta_hat[0] < ci.upper
        assert ci.std_error > 0
