"""Base class for sandwich covariance estimators of the FEQR slope."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from common.feqr_config import BandwidthRule, CiMethod, KernelSpec, RateTag
from common.panel import PanelData
from common.qrcore import QuantileLevel, TauLike
from common.sandwich import (
    BANDWIDTH_FLOOR,
    density_and_gamma,
    gamma_matrix_hat,
    m_hat,
    sandwich,
    sigma_hat,
    silverman_bandwidth,
)


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    sigma_hat: np.ndarray
    gamma_mat_hat: np.ndarray
    gamma_i_hat: np.ndarray
    f_i_hat: np.ndarray
    v_hat: np.ndarray
    rate: RateTag
    bandwidth: float
    method: CiMethod
    middle_matrix: np.ndarray
    bandwidth_floored: bool = False


@dataclass(frozen=True, eq=False)
class KernelParts:
    """Quantities shared by every sandwich variant for one fit."""

    spec: KernelSpec
    f_i_hat: np.ndarray
    gamma_i_hat: np.ndarray
    gamma_mat_hat: np.ndarray
    sigma_hat: np.ndarray


class BaseCovariance(ABC):
    """
    Abstract sandwich estimator V = G^{-1} M G^{-1} for one FEQR fit.
    Subclasses choose the middle matrix M and the rate the estimate is scaled for.
    """

    method: CiMethod
    rate: RateTag

    def __init__(
        self,
        panel: PanelData,
        fit,
        tau: Optional[TauLike] = None,
        spec: Optional[KernelSpec] = None,
        bandwidth_rule: BandwidthRule = BandwidthRule.SILVERMAN_N,
    ) -> None:
        self.panel = panel
        self.fit = fit
        self.tau = QuantileLevel.coerce(fit.tau if tau is None else tau).tau
        self.spec = spec
        self.bandwidth_rule = bandwidth_rule

    @abstractmethod
    def middle_matrix(self, parts: KernelParts) -> np.ndarray:
        """Return the meat of the sandwich, implemented in subclasses."""

    def kernel_spec(self) -> KernelSpec:
        """The configured kernel, or a Gaussian one with Silverman's bandwidth."""
        if self.spec is not None:
            return self.spec
        bandwidth = silverman_bandwidth(
            self.fit.residuals, self.panel.n_units, self.bandwidth_rule
        )
        return KernelSpec(bandwidth=bandwidth)

    def kernel_parts(self) -> KernelParts:
        spec = self.kernel_spec()
        resid = self.fit.residuals
        f_i_hat, gamma_i_hat = density_and_gamma(self.panel, resid, spec)
        rows, mean_row = m_hat(self.panel, resid, gamma_i_hat, self.tau)
        return KernelParts(
            spec=spec,
            f_i_hat=f_i_hat,
            gamma_i_hat=gamma_i_hat,
            gamma_mat_hat=gamma_matrix_hat(self.panel, resid, gamma_i_hat, spec),
            sigma_hat=sigma_hat(rows, mean_row),
        )

    def estimate(self) -> CovarianceEstimate:
        """Run the full pipeline: bandwidth, f and gamma, Sigma and Gamma, sandwich."""
        try:
            parts = self.kernel_parts()
            middle = self.middle_matrix(parts)
            bread = (parts.gamma_mat_hat + parts.gamma_mat_hat.T) / 2.0
            v_hat = sandwich(bread, middle)
        except Exception as e:
            self.handle_error(e)
            raise
        return CovarianceEstimate(
            sigma_hat=parts.sigma_hat,
            gamma_mat_hat=parts.gamma_mat_hat,
            gamma_i_hat=parts.gamma_i_hat,
            f_i_hat=parts.f_i_hat,
            v_hat=v_hat,
            rate=self.rate,
            bandwidth=parts.spec.bandwidth,
            method=self.method,
            middle_matrix=middle,
            bandwidth_floored=self.spec is None and parts.spec.bandwidth <= BANDWIDTH_FLOOR,
        )

    def handle_error(self, error: Exception) -> None:
        """Logs a failed estimate with its fit context."""
        logging.error(
            "Error in %s covariance (tau=%s, N=%s, T=%s): %s",
            self.method.value,
            self.tau,
            self.panel.n_units,
            self.panel.n_periods,
            str(error),
        )
