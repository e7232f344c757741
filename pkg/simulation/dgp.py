"""Location-scale common-shock DGP with per-replication counter-based streams.

    Y_it = alpha_i + beta X_it + (1 + gamma X_it) U_it
    X_it = chi2_it(3) + 0.3 alpha_i,   alpha_i ~ U(0, 1)
    U_it = (eps_it + eta_t) / sqrt(2)  (U_it = eps_it without the common shock)
"""

import math
from enum import Enum
from typing import Dict, Tuple

import numpy as np
from scipy import integrate, stats

from common.feqr_config import DgpConfig
from common.panel import PanelData
from common.qrcore import QuantileLevel, TauLike
from estimators.inference import normal_quantile

CHI2_DOF = 3
ALPHA_LOADING = 0.3


class StreamComponent(Enum):
    """Random components of one replication; the value fixes the child stream index."""

    ALPHA = 0
    CHI2 = 1
    EPSILON = 2
    ETA = 3


def replication_streams(base_seed: int, replication_index: int) -> Dict[StreamComponent, np.random.Generator]:
    """
    Independent Philox generators for every component of replication r,
    derived as children of SeedSequence(base_seed, spawn_key=(r,)).
    """
    parent = np.random.SeedSequence(entropy=base_seed, spawn_key=(replication_index,))
    children = parent.spawn(len(StreamComponent))
    return {
        component: np.random.Generator(np.random.Philox(children[component.value]))
        for component in StreamComponent
    }


def true_slope(tau: TauLike, beta: float, gamma_scale: float) -> float:
    """beta(tau) = beta + gamma q_tau."""
    return beta + gamma_scale * normal_quantile(QuantileLevel.coerce(tau).tau)


def _labels(count: int) -> Tuple[str, ...]:
    width = len(str(count))
    return tuple(f"{k + 1:0{width}d}" for k in range(count))


def generate_panel(dgp: DgpConfig, replication_index: int) -> PanelData:
    """Draw one panel; a pure function of (base_seed, replication_index)."""
    streams = replication_streams(dgp.base_seed, replication_index)
    n_units, n_periods = dgp.n_units, dgp.n_periods

    alpha = streams[StreamComponent.ALPHA].uniform(0.0, 1.0, n_units)
    normals = streams[StreamComponent.CHI2].standard_normal((n_units, n_periods, CHI2_DOF))
    chi2 = np.sum(normals**2, axis=2)
    x = chi2 + ALPHA_LOADING * alpha[:, np.newaxis]
    eps = streams[StreamComponent.EPSILON].standard_normal((n_units, n_periods))
    if dgp.common_shock:
        eta = streams[StreamComponent.ETA].standard_normal(n_periods)
        u = (eps + eta[np.newaxis, :]) / math.sqrt(2.0)
    else:
        u = eps
    y = alpha[:, np.newaxis] + dgp.beta * x + (1.0 + dgp.gamma_scale * x) * u
    return PanelData(
        y=y,
        x=x[:, :, np.newaxis],
        unit_ids=_labels(n_units),
        time_ids=_labels(n_periods),
    )


def _chi2_expectation(func, shift: float) -> float:
    value, _ = integrate.quad(
        lambda v: func(v + shift) * stats.chi2.pdf(v, CHI2_DOF), 0.0, np.inf, limit=200
    )
    return value


def population_covariance(dgp: DgpConfig, tau: TauLike) -> Tuple[float, float, float]:
    """
    Population (Sigma, Gamma, V = Sigma / Gamma^2) of the FEQR slope under this DGP.

    The conditional density of the quantile residual at zero is
    phi(q) / (1 + gamma x); given the common shock the score mean factorises
    into (tau - Phi(sqrt(2) q - eta)) E[X - gamma_a], so Sigma is the variance
    of that first factor times the squared average of E[X - gamma_a].
    Unit effects a ~ U(0, 1) are averaged with Gauss-Legendre quadrature.
    """
    level = QuantileLevel.coerce(tau).tau
    q = normal_quantile(level)
    g = dgp.gamma_scale
    nodes, weights = np.polynomial.legendre.leggauss(24)
    unit_effects = 0.5 * (nodes + 1.0)
    unit_weights = 0.5 * weights

    gamma_sum = 0.0
    drift_sum = 0.0
    for a, weight in zip(unit_effects, unit_weights):
        shift = ALPHA_LOADING * a
        e_w = _chi2_expectation(lambda v: 1.0 / (1.0 + g * v), shift)
        e_wx = _chi2_expectation(lambda v: v / (1.0 + g * v), shift)
        e_wxx = _chi2_expectation(lambda v: v * v / (1.0 + g * v), shift)
        gamma_a = e_wx / e_w
        gamma_sum += weight * stats.norm.pdf(q) * (e_wxx - gamma_a * e_wx)
        drift_sum += weight * (CHI2_DOF + shift - gamma_a)

    if dgp.common_shock:
        second_moment, _ = integrate.quad(
            lambda eta: stats.norm.cdf(math.sqrt(2.0) * q - eta) ** 2 * stats.norm.pdf(eta),
            -np.inf,
            np.inf,
        )
        shock_variance = second_moment - level**2
    else:
        shock_variance = 0.0

    sigma = shock_variance * drift_sum**2
    return sigma, gamma_sum, sigma / gamma_sum**2
