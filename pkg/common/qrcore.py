"""Check loss, FEQR objective, residuals and subgradient statistics."""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from common.errors import DimensionMismatch, IndexOutOfRange, InvalidQuantile
from common.panel import PanelData


@dataclass(frozen=True)
class QuantileLevel:
    tau: float

    def __post_init__(self) -> None:
        tau = float(self.tau)
        if not 0.0 < tau < 1.0:
            raise InvalidQuantile(self.tau)
        object.__setattr__(self, "tau", tau)

    def __float__(self) -> float:
        return self.tau

    @classmethod
    def coerce(cls, tau: Union["QuantileLevel", float]) -> "QuantileLevel":
        return tau if isinstance(tau, QuantileLevel) else cls(tau)


TauLike = Union[QuantileLevel, float]


@dataclass(frozen=True, eq=False)
class ParameterPoint:
    """Unit intercepts alpha (N) and common slope beta (p)."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        beta = np.array(self.beta, dtype=float).reshape(-1)
        alpha.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def zeros(cls, n_units: int, n_regressors: int) -> "ParameterPoint":
        return cls(alpha=np.zeros(n_units), beta=np.zeros(n_regressors))

    def scaled(self, factor: float) -> "ParameterPoint":
        return ParameterPoint(alpha=self.alpha * factor, beta=self.beta * factor)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.beta)))


def pairwise_sum(values: np.ndarray, axis: Optional[Union[int, Sequence[int]]] = None) -> np.ndarray:
    """
    Sum with numpy's pairwise reduction.

    numpy only reduces pairwise along a contiguous last axis, so the reduced
    axes are moved last and flattened into one contiguous axis first.
    """
    arr = np.asarray(values, dtype=float)
    if axis is None:
        return np.sum(np.ascontiguousarray(arr).reshape(-1))
    axes = (axis,) if np.isscalar(axis) else tuple(axis)
    axes = tuple(a % arr.ndim for a in axes)
    kept = [a for a in range(arr.ndim) if a not in axes]
    moved = np.transpose(arr, kept + list(axes))
    shape = [arr.shape[a] for a in kept] + [-1]
    return np.ascontiguousarray(moved).reshape(shape).sum(axis=-1)


def check_loss(u: Union[float, np.ndarray], tau: TauLike) -> Union[float, np.ndarray]:
    """rho_tau(u) = u (tau - 1{u < 0}); elementwise for arrays."""
    level = QuantileLevel.coerce(tau).tau
    u_arr = np.asarray(u, dtype=float)
    loss = np.where(u_arr < 0, u_arr * (level - 1.0), u_arr * level)
    return float(loss) if loss.ndim == 0 else loss


def _check_theta(panel: PanelData, theta: ParameterPoint) -> None:
    if theta.alpha.shape[0] != panel.n_units or theta.beta.shape[0] != panel.n_regressors:
        raise DimensionMismatch(
            f"theta has alpha length {theta.alpha.shape[0]} and beta length {theta.beta.shape[0]}; "
            f"panel has N={panel.n_units}, p={panel.n_regressors}"
        )


def residuals(panel: PanelData, theta: ParameterPoint) -> np.ndarray:
    """Y_it - alpha_i - X_it' beta as an N x T matrix."""
    _check_theta(panel, theta)
    return panel.y - theta.alpha[:, np.newaxis] - panel.x @ theta.beta


def objective(panel: PanelData, theta: ParameterPoint, tau: TauLike) -> float:
    """(1/NT) sum_i sum_t rho_tau(Y_it - alpha_i - X_it' beta)."""
    loss = check_loss(residuals(panel, theta), tau)
    return float(pairwise_sum(loss)) / (panel.n_units * panel.n_periods)


def score_signs(resid: np.ndarray, tau: TauLike) -> np.ndarray:
    """tau - 1{resid <= 0}; ties count as below the fitted quantile."""
    level = QuantileLevel.coerce(tau).tau
    return level - (resid <= 0).astype(float)


def subgrad_h1(panel: PanelData, i: int, theta: ParameterPoint, tau: TauLike) -> float:
    """H1_Ni = (1/T) sum_t (tau - 1{Y_it <= alpha_i + X_it' beta})."""
    if not 0 <= i < panel.n_units:
        raise IndexOutOfRange(f"unit index {i} outside [0, {panel.n_units})")
    return float(subgrad_h1_all(panel, theta, tau)[i])


def subgrad_h1_all(panel: PanelData, theta: ParameterPoint, tau: TauLike) -> np.ndarray:
    signs = score_signs(residuals(panel, theta), tau)
    return pairwise_sum(signs, axis=1) / panel.n_periods


def subgrad_h2(panel: PanelData, theta: ParameterPoint, tau: TauLike) -> np.ndarray:
    """H2_N = (1/NT) sum_i sum_t (tau - 1{Y_it <= fitted}) X_it."""
    signs = score_signs(residuals(panel, theta), tau)
    weighted = signs[:, :, np.newaxis] * panel.x
    return pairwise_sum(weighted, axis=(0, 1)) / (panel.n_units * panel.n_periods)
