"""Interior-point FEQR solver with a block-structured normal-equation solve.

The quantile regression LP is solved in the bounded dual form

    min  -y'a   s.t.  Z'a = (1 - tau) Z'1,  0 <= a <= 1,

where Z = [D, X] stacks the N unit-dummy columns and the p regressors. The
coefficients are minus the dual multipliers of the equality constraints.
Each Newton step needs (Z'QZ)^{-1}; the dummy block of Z'QZ is diagonal, so
it is eliminated and only a p x p Schur complement is factorised.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from common.errors import (
    DidNotConverge,
    DimensionMismatch,
    InvalidArgument,
    PathFitError,
    SingularNormalEquations,
)
from common.feqr_config import SolverOptions
from common.panel import PanelData, regressor_bound, within_rank
from common.qrcore import (
    ParameterPoint,
    QuantileLevel,
    TauLike,
    objective,
    residuals,
    subgrad_h1_all,
    subgrad_h2,
)

# fraction of the distance to the boundary taken by each step
_STEP_SCALE = 0.99995


@dataclass(frozen=True)
class Certificate:
    max_h1: float
    h2_norm: float
    bound_h1: float
    bound_h2: float
    passes: bool


@dataclass(frozen=True, eq=False)
class FeqrFit:
    tau: float
    theta: ParameterPoint
    objective_value: float
    residuals: np.ndarray
    certificate: Certificate
    iterations: int
    converged: bool
    duality_gap: float = 0.0
    refined: bool = False

    @property
    def alpha_hat(self) -> np.ndarray:
        return self.theta.alpha

    @property
    def beta_hat(self) -> np.ndarray:
        return self.theta.beta

    def raise_for_status(self) -> None:
        """Raise DidNotConverge if the fit is not certified optimal."""
        if not self.converged:
            raise DidNotConverge(self)


class _BlockSystem:
    """
    Operators of the FEQR constraint matrix A = Z' for a fixed panel.
    Observations are ordered unit-major: index i * T + t.
    """

    def __init__(self, panel: PanelData) -> None:
        self.n_units = panel.n_units
        self.n_periods = panel.n_periods
        self.n_regressors = panel.n_regressors
        self.x = np.ascontiguousarray(panel.x)
        self.x_flat = self.x.reshape(-1, self.n_regressors)

    def apply(self, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """A v = (per-unit sums of v, X'v)."""
        return v.reshape(self.n_units, self.n_periods).sum(axis=1), self.x_flat.T @ v

    def apply_transpose(self, d_alpha: np.ndarray, d_beta: np.ndarray) -> np.ndarray:
        """A' d = d_alpha[unit] + X d_beta."""
        return (d_alpha[:, np.newaxis] + self.x @ d_beta).reshape(-1)

    def solve_normal(
        self, q: np.ndarray, r_alpha: np.ndarray, r_beta: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Solve (A Q A') d = r by eliminating the diagonal intercept block.
        Cost is O(NTp + Np^2) plus a p x p factorisation.
        """
        q_units = q.reshape(self.n_units, self.n_periods)
        q_sum = q_units.sum(axis=1)
        q_x = np.einsum("it,itk->ik", q_units, self.x)
        q_xx = (self.x_flat * q[:, np.newaxis]).T @ self.x_flat
        scaled = q_x / q_sum[:, np.newaxis]
        schur = q_xx - q_x.T @ scaled
        rhs = r_beta - scaled.T @ r_alpha
        try:
            d_beta = linalg.cho_solve(linalg.cho_factor(schur), rhs)
        except linalg.LinAlgError:
            d_beta = np.linalg.lstsq(schur, rhs, rcond=None)[0]
        d_alpha = (r_alpha - q_x @ d_beta) / q_sum
        return d_alpha, d_beta


def _max_step(values: np.ndarray, steps: np.ndarray) -> float:
    shrinking = steps < 0
    if not np.any(shrinking):
        return 1.0
    return float(min(1.0, _STEP_SCALE * np.min(-values[shrinking] / steps[shrinking])))


def _interior_point(
    panel: PanelData,
    tau: float,
    options: SolverOptions,
    start: Optional[ParameterPoint],
) -> Tuple[ParameterPoint, int, float]:
    """Mehrotra predictor-corrector on the bounded dual; returns (theta, iterations, gap)."""
    system = _BlockSystem(panel)
    n_obs = panel.n_units * panel.n_periods
    c = -panel.y.reshape(-1)

    x = np.full(n_obs, 1.0 - tau)
    s = np.full(n_obs, tau)
    if start is None:
        ones = np.ones(n_obs)
        y_alpha, y_beta = system.solve_normal(ones, *system.apply(c))
    else:
        y_alpha, y_beta = -start.alpha.copy(), -start.beta.copy()
    r = c - system.apply_transpose(y_alpha, y_beta)
    shift = max(0.01 * float(np.mean(np.abs(r))), 1e-10)
    z = np.maximum(r, 0.0) + shift
    w = np.maximum(-r, 0.0) + shift

    gap = float(x @ z + s @ w)
    iteration = 0
    while gap / n_obs > options.duality_gap_tol and iteration < options.max_iterations:
        iteration += 1
        q = 1.0 / (z / x + w / s)

        # predictor
        g = w - z
        d_alpha, d_beta = system.solve_normal(q, *[-part for part in system.apply(q * g)])
        dx = q * (system.apply_transpose(d_alpha, d_beta) + g)
        ds = -dx
        dz = -z - z * dx / x
        dw = -w - w * ds / s
        step_p = min(_max_step(x, dx), _max_step(s, ds))
        step_d = min(_max_step(z, dz), _max_step(w, dw))

        mu = gap / (2 * n_obs)
        mu_aff = (
            (x + step_p * dx) @ (z + step_d * dz) + (s + step_p * ds) @ (w + step_d * dw)
        ) / (2 * n_obs)
        target = mu * (mu_aff / mu) ** 3

        # corrector
        rz = target - x * z - dx * dz
        rw = target - s * w - ds * dw
        g = rz / x - rw / s
        d_alpha, d_beta = system.solve_normal(q, *[-part for part in system.apply(q * g)])
        dx = q * (system.apply_transpose(d_alpha, d_beta) + g)
        ds = -dx
        dz = (rz - z * dx) / x
        dw = (rw - w * ds) / s
        step_p = min(_max_step(x, dx), _max_step(s, ds))
        step_d = min(_max_step(z, dz), _max_step(w, dw))

        x = x + step_p * dx
        s = s + step_p * ds
        y_alpha = y_alpha + step_d * d_alpha
        y_beta = y_beta + step_d * d_beta
        z = z + step_d * dz
        w = w + step_d * dw
        gap = float(x @ z + s @ w)

    return ParameterPoint(alpha=-y_alpha, beta=-y_beta), iteration, gap / n_obs


def _snap_to_vertex(panel: PanelData, theta: ParameterPoint) -> Optional[ParameterPoint]:
    """
    Crossover to the basic solution interpolating the N + p observations
    closest to the fitted hyperplane: one per unit, then p more chosen
    greedily so the within-unit differences stay linearly independent.
    """
    n_units, n_periods, n_regressors = panel.n_units, panel.n_periods, panel.n_regressors
    distance = np.abs(residuals(panel, theta))
    base = distance.argmin(axis=1)
    units = np.arange(n_units)

    rows: List[np.ndarray] = []
    targets: List[float] = []
    ranked = np.argsort(distance, axis=None, kind="stable")
    for flat_index in ranked:
        if len(rows) == n_regressors:
            break
        i, t = divmod(int(flat_index), n_periods)
        if t == base[i]:
            continue
        row = panel.x[i, t] - panel.x[i, base[i]]
        if np.linalg.matrix_rank(np.vstack(rows + [row])) == len(rows) + 1:
            rows.append(row)
            targets.append(panel.y[i, t] - panel.y[i, base[i]])
    if len(rows) < n_regressors:
        return None

    try:
        beta = np.linalg.solve(np.vstack(rows), np.array(targets))
    except np.linalg.LinAlgError:
        return None
    alpha = panel.y[units, base] - panel.x[units, base] @ beta
    vertex = ParameterPoint(alpha=alpha, beta=beta)
    return vertex if vertex.is_finite() else None


def certify(panel: PanelData, fit: FeqrFit, tol_cert: float = 1e-6) -> Certificate:
    """
    Compare the subgradient statistics at the fit with the counting bounds
    2(p+1)/T and 2(p+1) sup|x| / T that hold at any exact optimum.
    """
    if (
        fit.theta.alpha.shape[0] != panel.n_units
        or fit.theta.beta.shape[0] != panel.n_regressors
    ):
        raise DimensionMismatch(
            f"fit has N={fit.theta.alpha.shape[0]}, p={fit.theta.beta.shape[0]}; "
            f"panel has N={panel.n_units}, p={panel.n_regressors}"
        )
    count = 2.0 * (panel.n_regressors + 1) / panel.n_periods
    max_h1 = float(np.max(np.abs(subgrad_h1_all(panel, fit.theta, fit.tau))))
    h2_norm = float(np.max(np.abs(subgrad_h2(panel, fit.theta, fit.tau))))
    bound_h1 = count + tol_cert
    bound_h2 = count * regressor_bound(panel) + tol_cert
    return Certificate(
        max_h1=max_h1,
        h2_norm=h2_norm,
        bound_h1=bound_h1,
        bound_h2=bound_h2,
        passes=bool(max_h1 <= bound_h1 and h2_norm <= bound_h2),
    )


def _build_fit(
    panel: PanelData,
    tau: float,
    theta: ParameterPoint,
    iterations: int,
    gap: float,
    refined: bool,
    options: SolverOptions,
    gap_reached: bool,
) -> FeqrFit:
    draft = FeqrFit(
        tau=tau,
        theta=theta,
        objective_value=objective(panel, theta, tau),
        residuals=residuals(panel, theta),
        certificate=Certificate(0.0, 0.0, 0.0, 0.0, False),
        iterations=iterations,
        converged=False,
        duality_gap=gap,
        refined=refined,
    )
    certificate = certify(panel, draft, options.tol_cert)
    draft.residuals.setflags(write=False)
    return FeqrFit(
        tau=tau,
        theta=theta,
        objective_value=draft.objective_value,
        residuals=draft.residuals,
        certificate=certificate,
        iterations=iterations,
        converged=bool(gap_reached and certificate.passes),
        duality_gap=gap,
        refined=refined,
    )


def fit_feqr(
    panel: PanelData,
    tau: TauLike,
    options: Optional[SolverOptions] = None,
    start: Optional[ParameterPoint] = None,
) -> FeqrFit:
    """
    Minimise the FEQR objective over unit intercepts and the common slope.

    A fit that fails its optimality certificate is still returned, with
    converged=False; call FeqrFit.raise_for_status() to turn it into an error.
    """
    level = QuantileLevel.coerce(tau).tau
    options = options or SolverOptions()
    if panel.n_periods < panel.n_regressors + 2:
        logging.warning(
            "T=%s < p+2=%s: unit intercepts are weakly identified",
            panel.n_periods,
            panel.n_regressors + 2,
        )
    rank = within_rank(panel)
    if rank < panel.n_regressors:
        raise SingularNormalEquations(rank, panel.n_regressors)

    theta, iterations, gap = _interior_point(panel, level, options, start)
    gap_reached = gap <= options.duality_gap_tol
    refined = False
    if options.refine:
        vertex = _snap_to_vertex(panel, theta)
        if vertex is not None:
            # accept the vertex unless it is measurably worse than the interior point
            if objective(panel, vertex, level) <= objective(panel, theta, level) + options.duality_gap_tol:
                theta = vertex
                refined = True

    fit = _build_fit(panel, level, theta, iterations, gap, refined, options, gap_reached)
    if not fit.converged:
        logging.warning(
            "FEQR fit at tau=%s not certified: gap=%.3e, max_h1=%.4g (bound %.4g), h2=%.4g (bound %.4g)",
            level,
            gap,
            fit.certificate.max_h1,
            fit.certificate.bound_h1,
            fit.certificate.h2_norm,
            fit.certificate.bound_h2,
        )
    return fit


def fit_path(
    panel: PanelData,
    taus: Sequence[TauLike],
    options: Optional[SolverOptions] = None,
) -> List[FeqrFit]:
    """
    Fit every quantile level in order, warm-starting each interior-point run
    from the previous level's coefficients.
    """
    levels = [QuantileLevel.coerce(tau).tau for tau in taus]
    if not levels:
        raise InvalidArgument("InvalidArgument: taus must be nonempty")
    fits: List[FeqrFit] = []
    errors = {}
    start: Optional[ParameterPoint] = None
    for level in levels:
        try:
            fit = fit_feqr(panel, level, options, start=start)
        except Exception as e:
            logging.error("Error fitting tau=%s: %s", level, e)
            errors[level] = e
            continue
        fits.append(fit)
        start = fit.theta
    if errors:
        raise PathFitError({fit.tau: fit for fit in fits}, errors)
    return fits
