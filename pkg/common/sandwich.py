"""Kernel-smoothed building blocks of the FEQR sandwich covariance."""

import logging
from typing import Tuple

import numpy as np
from scipy import stats

from common.errors import DimensionMismatch, InvalidArgument, SingularGamma, ZeroDensity
from common.feqr_config import BandwidthRule, KernelKind, KernelSpec
from common.panel import PanelData
from common.qrcore import TauLike, pairwise_sum, score_signs

SILVERMAN_FACTOR = 1.06
BANDWIDTH_FLOOR = 0.05
MAX_CONDITION = 1e12


def kernel_weight(u, spec: KernelSpec):
    """K_h(u) = K(u / h) / h; elementwise for arrays."""
    if spec.kind is KernelKind.GAUSSIAN:
        return stats.norm.pdf(np.asarray(u, dtype=float) / spec.bandwidth) / spec.bandwidth
    raise InvalidArgument(f"unsupported kernel {spec.kind}")


def silverman_bandwidth(
    resid: np.ndarray,
    n_units: int,
    rule: BandwidthRule = BandwidthRule.SILVERMAN_N,
    floor: float = BANDWIDTH_FLOOR,
) -> float:
    """
    max(1.06 sd(resid) n^(-1/5), floor), with sd pooled over all residuals
    (denominator NT - 1) and n = N or NT depending on the rule.
    """
    values = np.asarray(resid, dtype=float).reshape(-1)
    if values.size < 2:
        raise InvalidArgument(f"need at least 2 residuals for a bandwidth, got {values.size}")
    sd = float(np.std(values, ddof=1))
    if sd == 0.0:
        logging.warning("DegenerateResiduals: residual sd is 0, using bandwidth floor %s", floor)
        return floor
    size = n_units if rule is BandwidthRule.SILVERMAN_N else values.size
    bandwidth = SILVERMAN_FACTOR * sd * size ** (-0.2)
    if bandwidth < floor:
        logging.warning("Silverman bandwidth %.4g is below the floor, using %s", bandwidth, floor)
        return floor
    return bandwidth


def _centered_regressors(panel: PanelData, gamma_i_hat: np.ndarray) -> np.ndarray:
    if gamma_i_hat.shape != (panel.n_units, panel.n_regressors):
        raise DimensionMismatch(
            f"gamma_i_hat has shape {gamma_i_hat.shape}, expected {(panel.n_units, panel.n_regressors)}"
        )
    return panel.x - gamma_i_hat[:, np.newaxis, :]


def _check_residuals(panel: PanelData, resid: np.ndarray) -> None:
    if resid.shape != (panel.n_units, panel.n_periods):
        raise DimensionMismatch(
            f"residuals have shape {resid.shape}, expected {(panel.n_units, panel.n_periods)}"
        )


def density_and_gamma(
    panel: PanelData, resid: np.ndarray, spec: KernelSpec
) -> Tuple[np.ndarray, np.ndarray]:
    """
    f_i = (1/T) sum_t K_h(e_it) and the density-weighted regressor means
    gamma_i = (f_i T)^{-1} sum_t K_h(e_it) X_it.
    """
    _check_residuals(panel, resid)
    weights = kernel_weight(resid, spec)
    f_i_hat = pairwise_sum(weights, axis=1) / panel.n_periods
    if np.any(f_i_hat <= 0):
        raise ZeroDensity(np.flatnonzero(f_i_hat <= 0).tolist())
    weighted_x = pairwise_sum(weights[:, :, np.newaxis] * panel.x, axis=1)
    gamma_i_hat = weighted_x / (f_i_hat * panel.n_periods)[:, np.newaxis]
    return f_i_hat, gamma_i_hat


def m_hat(
    panel: PanelData, resid: np.ndarray, gamma_i_hat: np.ndarray, tau: TauLike
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cross-sectional score averages m_Nt = (1/N) sum_i (tau - 1{e_it <= 0})(X_it - gamma_i),
    one row per period, and their time mean.
    """
    _check_residuals(panel, resid)
    centered = _centered_regressors(panel, gamma_i_hat)
    scores = score_signs(resid, tau)[:, :, np.newaxis] * centered
    rows = pairwise_sum(scores, axis=0) / panel.n_units
    return rows, pairwise_sum(rows, axis=0) / panel.n_periods


def sigma_hat(m_rows: np.ndarray, m_bar: np.ndarray) -> np.ndarray:
    """(1/T) sum_t (m_t - m_bar)(m_t - m_bar)'."""
    centered = np.asarray(m_rows, dtype=float) - np.asarray(m_bar, dtype=float)
    outer = centered[:, :, np.newaxis] * centered[:, np.newaxis, :]
    return pairwise_sum(outer, axis=0) / centered.shape[0]


def gamma_matrix_hat(
    panel: PanelData, resid: np.ndarray, gamma_i_hat: np.ndarray, spec: KernelSpec
) -> np.ndarray:
    """(1/NT) sum_i sum_t K_h(e_it) X_it (X_it - gamma_i)', unsymmetrised."""
    _check_residuals(panel, resid)
    centered = _centered_regressors(panel, gamma_i_hat)
    weights = kernel_weight(resid, spec)
    terms = (
        weights[:, :, np.newaxis, np.newaxis]
        * panel.x[:, :, :, np.newaxis]
        * centered[:, :, np.newaxis, :]
    )
    return pairwise_sum(terms, axis=(0, 1)) / (panel.n_units * panel.n_periods)


def omega_hat(panel: PanelData, gamma_i_hat: np.ndarray, tau: float) -> np.ndarray:
    """Independence-case meat tau(1-tau)/(NT) sum (X_it - gamma_i)(X_it - gamma_i)'."""
    centered = _centered_regressors(panel, gamma_i_hat)
    outer = centered[:, :, :, np.newaxis] * centered[:, :, np.newaxis, :]
    scale = tau * (1.0 - tau) / (panel.n_units * panel.n_periods)
    return scale * pairwise_sum(outer, axis=(0, 1))


def sandwich(bread: np.ndarray, meat: np.ndarray) -> np.ndarray:
    """
    B^{-1} M B^{-1} for symmetric B, inverted through its eigendecomposition.
    Raises SingularGamma above the condition-number guard.
    """
    eigenvalues, eigenvectors = np.linalg.eigh(bread)
    magnitude = np.abs(eigenvalues)
    if not np.all(np.isfinite(magnitude)) or magnitude.min() == 0.0:
        raise SingularGamma(float("inf"), bread)
    condition = float(magnitude.max() / magnitude.min())
    if condition > MAX_CONDITION:
        raise SingularGamma(condition, bread)
    inverse = (eigenvectors / eigenvalues) @ eigenvectors.T
    product = inverse @ meat @ inverse
    return (product + product.T) / 2.0
