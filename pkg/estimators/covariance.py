"""Robust (common-shock) and standard (independence) covariance estimators."""

from typing import Optional

import numpy as np

from common.base_covariance import BaseCovariance, CovarianceEstimate, KernelParts
from common.factory import CovarianceFactory
from common.feqr_config import BandwidthRule, CiMethod, KernelSpec, RateTag
from common.panel import PanelData
from common.qrcore import TauLike
from common.sandwich import (  # noqa: F401  re-exported covariance operations
    density_and_gamma,
    gamma_matrix_hat,
    kernel_weight,
    m_hat,
    omega_hat,
    sigma_hat,
    silverman_bandwidth,
)


class RobustCovariance(BaseCovariance):
    """
    Sandwich with the time-series variance of cross-sectional score averages
    as its meat. Valid with or without common shocks; var(beta_j) ~ V_jj / T.
    """

    method = CiMethod.ROBUST
    rate = RateTag.ROBUST_SQRT_T

    def middle_matrix(self, parts: KernelParts) -> np.ndarray:
        return parts.sigma_hat


class StandardCovariance(BaseCovariance):
    """
    Conventional sandwich assuming cross-sectional independence;
    var(beta_j) ~ V_jj / (NT).
    """

    method = CiMethod.STANDARD
    rate = RateTag.STANDARD_SQRT_NT

    def middle_matrix(self, parts: KernelParts) -> np.ndarray:
        return omega_hat(self.panel, parts.gamma_i_hat, self.tau)


CovarianceFactory.register(
    {
        CiMethod.ROBUST: RobustCovariance,
        CiMethod.STANDARD: StandardCovariance,
    }
)


def robust_covariance(
    panel: PanelData,
    fit,
    tau: Optional[TauLike] = None,
    spec: Optional[KernelSpec] = None,
    bandwidth_rule: BandwidthRule = BandwidthRule.SILVERMAN_N,
) -> CovarianceEstimate:
    return RobustCovariance(panel, fit, tau, spec, bandwidth_rule).estimate()


def standard_covariance(
    panel: PanelData,
    fit,
    tau: Optional[TauLike] = None,
    spec: Optional[KernelSpec] = None,
    bandwidth_rule: BandwidthRule = BandwidthRule.SILVERMAN_N,
) -> CovarianceEstimate:
    return StandardCovariance(panel, fit, tau, spec, bandwidth_rule).estimate()
