"""Configuration classes for fitting, covariance estimation and Monte Carlo studies."""

import logging
from enum import Enum
from typing import Iterable, List, Optional

from common.errors import ConfigError, InvalidQuantile


class KernelKind(Enum):
    """Smoothing kernels available to the covariance estimators."""

    GAUSSIAN = "gaussian"


class BandwidthRule(Enum):
    """Sample-size exponent used by Silverman's rule.

    Keys:
    - SILVERMAN_N: h = 1.06 sd N^(-1/5)
    - SILVERMAN_NT: h = 1.06 sd (NT)^(-1/5)
    """

    SILVERMAN_N = "SilvermanN"
    SILVERMAN_NT = "SilvermanNT"


class RateTag(Enum):
    """Convergence rate a covariance estimate is scaled for."""

    ROBUST_SQRT_T = "RobustSqrtT"
    STANDARD_SQRT_NT = "StandardSqrtNT"


class CiMethod(Enum):
    """Covariance estimator behind a confidence interval."""

    ROBUST = "robust"
    STANDARD = "standard"


class ReportColumn(Enum):
    """Column keys of a study report, in output order.

    Keys:
    - N_UNITS, N_PERIODS, TAU: cell identification
    - BIAS, RMSE: estimator accuracy
    - COVERAGE_ROBUST, COVERAGE_STANDARD: empirical CI coverage
    - MEAN_CI_WIDTH_ROBUST, MEAN_CI_WIDTH_STANDARD: average CI width
    - N_FAILED: replications excluded from the cell
    """

    N_UNITS = "n_units"
    N_PERIODS = "n_periods"
    TAU = "tau"
    BIAS = "bias"
    RMSE = "rmse"
    COVERAGE_ROBUST = "coverage_robust"
    COVERAGE_STANDARD = "coverage_standard"
    MEAN_CI_WIDTH_ROBUST = "mean_ci_width_robust"
    MEAN_CI_WIDTH_STANDARD = "mean_ci_width_standard"
    N_FAILED = "n_failed"


def check_taus(taus: Iterable[float]) -> List[float]:
    """Validate quantile levels, returning them as floats."""
    levels = [float(tau) for tau in taus]
    for tau in levels:
        if not 0.0 < tau < 1.0:
            raise InvalidQuantile(tau)
    return levels


class SolverOptions:
    """
    Tuning of the interior-point FEQR solver.
    Holds configuration only; the solver never mutates it.
    """

    def __init__(
        self,
        max_iterations: int = 200,
        duality_gap_tol: float = 1e-9,
        tol_cert: float = 1e-6,
        refine: bool = True,
    ) -> None:
        if max_iterations < 1:
            raise ConfigError(f"max_iterations must be positive, got {max_iterations}")
        # tol_cert = 0 is allowed for exact vertex checks
        if duality_gap_tol <= 0 or tol_cert < 0:
            raise ConfigError(
                f"tolerances must be positive, got gap={duality_gap_tol}, cert={tol_cert}"
            )
        self.max_iterations = int(max_iterations)
        self.duality_gap_tol = float(duality_gap_tol)
        self.tol_cert = float(tol_cert)
        self.refine = bool(refine)


class KernelSpec:
    """
    Kernel family and bandwidth used by the covariance estimators.
    """

    def __init__(self, bandwidth: float, kind: KernelKind = KernelKind.GAUSSIAN) -> None:
        if not isinstance(kind, KernelKind):
            raise ConfigError(f"Invalid kernel, must be an instance of KernelKind Enum: {kind}")
        if not bandwidth > 0:
            raise ConfigError(f"bandwidth must be positive, got {bandwidth}")
        self.kind = kind
        self.bandwidth = float(bandwidth)


class DgpConfig:
    """
    Parameters of the location-scale common-shock data-generating process.
    """

    def __init__(
        self,
        n_units: int,
        n_periods: int,
        beta: float = 1.0,
        gamma_scale: float = 0.2,
        taus: Optional[Iterable[float]] = None,
        common_shock: bool = True,
        base_seed: int = 0,
    ) -> None:
        if n_units < 2 or n_periods < 3:
            raise ConfigError(
                f"need n_units >= 2 and n_periods >= 3, got N={n_units}, T={n_periods}"
            )
        levels = check_taus(taus if taus is not None else (0.25, 0.5, 0.75))
        if not levels:
            raise ConfigError("taus must be nonempty")
        if not 0 <= int(base_seed) < 2**64:
            raise ConfigError(f"base_seed must be an unsigned 64-bit integer, got {base_seed}")
        self.n_units = int(n_units)
        self.n_periods = int(n_periods)
        self.beta = float(beta)
        self.gamma_scale = float(gamma_scale)
        self.taus = levels
        self.common_shock = bool(common_shock)
        self.base_seed = int(base_seed)


class StudyConfig:
    """
    A Monte Carlo study over one (N, T) cell and all configured quantile levels.
    """

    def __init__(
        self,
        dgp: DgpConfig,
        replications: int = 2000,
        level: float = 0.95,
        bandwidth_rule: BandwidthRule = BandwidthRule.SILVERMAN_N,
        workers: Optional[int] = None,
        solver: Optional[SolverOptions] = None,
    ) -> None:
        if replications < 1:
            raise ConfigError(f"replications must be >= 1, got {replications}")
        if not 0.0 < level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {level}")
        if not isinstance(bandwidth_rule, BandwidthRule):
            raise ConfigError(f"Invalid bandwidth rule: {bandwidth_rule}")
        if workers is not None and workers < 1:
            logging.warning("workers=%s is not positive; using 1", workers)
            workers = 1
        self.dgp = dgp
        self.replications = int(replications)
        self.level = float(level)
        self.bandwidth_rule = bandwidth_rule
        # None defers to FEQR_WORKERS
        self.workers = None if workers is None else int(workers)
        self.solver = solver or SolverOptions()
