"""Wald confidence intervals for the FEQR slope at the estimator's rate."""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import special

from common.base_covariance import CovarianceEstimate
from common.errors import DimensionMismatch, InvalidArgument, NegativeVariance
from common.feqr_config import CiMethod, RateTag

# relative tolerance (times trace V) below which a negative variance is rounding noise
_NEGATIVE_VARIANCE_TOL = 1e-12


@dataclass(frozen=True)
class ConfidenceInterval:
    coefficient_index: int
    estimate: float
    std_error: float
    lower: float
    upper: float
    level: float
    method: CiMethod
    degenerate: bool = False

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def normal_quantile(prob: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < prob < 1.0:
        raise InvalidArgument(f"InvalidArgument: probability must lie in (0, 1), got {prob}")
    return float(special.ndtri(prob))


def std_errors(cov: CovarianceEstimate, n_units: int, n_periods: int) -> np.ndarray:
    """
    Standard errors sqrt(V_jj / T) for the robust rate and sqrt(V_jj / (NT))
    for the standard rate.
    """
    diagonal = np.diag(cov.v_hat).astype(float)
    tolerance = _NEGATIVE_VARIANCE_TOL * max(float(np.trace(cov.v_hat)), 0.0)
    for j, value in enumerate(diagonal):
        if value < -tolerance:
            raise NegativeVariance(j, float(value))
        if value < 0:
            logging.warning("Clamping tiny negative variance V[%s,%s]=%.3e to 0", j, j, value)
            diagonal[j] = 0.0
    scale = n_periods if cov.rate is RateTag.ROBUST_SQRT_T else n_units * n_periods
    return np.sqrt(diagonal / scale)


def confidence_intervals(fit, cov: CovarianceEstimate, level: float = 0.95) -> List[ConfidenceInterval]:
    """Symmetric normal intervals beta_j +/- z_{(1+level)/2} se_j."""
    if not 0.0 < level < 1.0:
        raise InvalidArgument(f"InvalidArgument: level must lie in (0, 1), got {level}")
    beta = fit.theta.beta
    if beta.shape[0] != cov.v_hat.shape[0]:
        raise DimensionMismatch(
            f"fit has p={beta.shape[0]} but covariance is {cov.v_hat.shape[0]}x{cov.v_hat.shape[0]}"
        )
    n_units, n_periods = fit.residuals.shape
    errors = std_errors(cov, n_units, n_periods)
    z = normal_quantile((1.0 + level) / 2.0)
    intervals = []
    for j, (estimate, se) in enumerate(zip(beta, errors)):
        half_width = z * float(se)
        intervals.append(
            ConfidenceInterval(
                coefficient_index=j,
                estimate=float(estimate),
                std_error=float(se),
                lower=float(estimate) - half_width,
                upper=float(estimate) + half_width,
                level=level,
                method=cov.method,
                degenerate=bool(se == 0.0),
            )
        )
    return intervals
