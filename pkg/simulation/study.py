"""Seeded Monte Carlo replications and their aggregation into study tables."""

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from common.errors import EmptyCell, FeqrError, PathFitError, StudyAborted
from common.factory import CovarianceFactory
from common.feqr_config import CiMethod, ReportColumn, StudyConfig
from common.panel import PanelData
from common.qrcore import pairwise_sum
from common.study_handler import StudyHandler
from estimators import covariance  # noqa: F401  registers the covariance estimators
from estimators.inference import confidence_intervals
from estimators.solver import FeqrFit, fit_path
from simulation.dgp import generate_panel, true_slope


@dataclass(frozen=True)
class ReplicationRecord:
    replication_index: int
    n_units: int
    n_periods: int
    tau: float
    true_slope: float
    beta_hat: float = float("nan")
    covered_robust: bool = False
    covered_standard: bool = False
    ci_width_robust: float = float("nan")
    ci_width_standard: float = float("nan")
    certificate_passed: bool = False
    failed: bool = False
    error: Optional[str] = None


@dataclass(frozen=True)
class StudyCell:
    n_units: int
    n_periods: int
    tau: float
    bias: float
    rmse: float
    coverage_robust: float
    coverage_standard: float
    mean_ci_width_robust: float
    mean_ci_width_standard: float
    n_failed: int


@dataclass
class StudyReport:
    cells: List[StudyCell] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        columns = [column.value for column in ReportColumn]
        return pd.DataFrame([asdict(cell) for cell in self.cells], columns=columns)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "StudyReport":
        cells = [
            StudyCell(
                n_units=int(row[ReportColumn.N_UNITS.value]),
                n_periods=int(row[ReportColumn.N_PERIODS.value]),
                tau=float(row[ReportColumn.TAU.value]),
                bias=float(row[ReportColumn.BIAS.value]),
                rmse=float(row[ReportColumn.RMSE.value]),
                coverage_robust=float(row[ReportColumn.COVERAGE_ROBUST.value]),
                coverage_standard=float(row[ReportColumn.COVERAGE_STANDARD.value]),
                mean_ci_width_robust=float(row[ReportColumn.MEAN_CI_WIDTH_ROBUST.value]),
                mean_ci_width_standard=float(row[ReportColumn.MEAN_CI_WIDTH_STANDARD.value]),
                n_failed=int(row[ReportColumn.N_FAILED.value]),
            )
            for _, row in frame.iterrows()
        ]
        return cls(cells=cells)

    def extend(self, other: "StudyReport") -> None:
        self.cells.extend(other.cells)


def _failed_record(study: StudyConfig, index: int, tau: float, reason: str) -> ReplicationRecord:
    dgp = study.dgp
    return ReplicationRecord(
        replication_index=index,
        n_units=dgp.n_units,
        n_periods=dgp.n_periods,
        tau=tau,
        true_slope=true_slope(tau, dgp.beta, dgp.gamma_scale),
        failed=True,
        error=reason,
    )


def _fit_levels(panel: PanelData, study: StudyConfig) -> Dict[float, FeqrFit]:
    try:
        fits = fit_path(panel, study.dgp.taus, study.solver)
    except PathFitError as e:
        return e.fits
    return {fit.tau: fit for fit in fits}


def run_replication(study: StudyConfig, replication_index: int) -> List[ReplicationRecord]:
    """
    One Monte Carlo draw: generate, fit every tau, build robust and standard
    intervals and record whether each covers beta(tau).
    """
    dgp = study.dgp
    panel = generate_panel(dgp, replication_index)
    fits = _fit_levels(panel, study)

    records = []
    for tau in dgp.taus:
        truth = true_slope(tau, dgp.beta, dgp.gamma_scale)
        fit = fits.get(tau)
        if fit is None or not fit.converged:
            reason = "fit failed" if fit is None else "fit not certified"
            records.append(_failed_record(study, replication_index, tau, reason))
            continue
        try:
            intervals = {}
            for method in (CiMethod.ROBUST, CiMethod.STANDARD):
                estimator = CovarianceFactory.create(
                    method, panel, fit, bandwidth_rule=study.bandwidth_rule
                )
                intervals[method] = confidence_intervals(fit, estimator.estimate(), study.level)[0]
        except FeqrError as e:
            records.append(_failed_record(study, replication_index, tau, str(e)))
            continue
        robust, standard = intervals[CiMethod.ROBUST], intervals[CiMethod.STANDARD]
        records.append(
            ReplicationRecord(
                replication_index=replication_index,
                n_units=dgp.n_units,
                n_periods=dgp.n_periods,
                tau=tau,
                true_slope=truth,
                beta_hat=float(fit.beta_hat[0]),
                covered_robust=robust.contains(truth),
                covered_standard=standard.contains(truth),
                ci_width_robust=robust.width,
                ci_width_standard=standard.width,
                certificate_passed=fit.certificate.passes,
            )
        )
    return records


def aggregate(records: Sequence[ReplicationRecord]) -> StudyCell:
    """Bias, RMSE, coverage and mean widths over the successful records of one cell."""
    if not records:
        raise EmptyCell("EmptyCell: no records")
    successful = [record for record in records if not record.failed]
    if not successful:
        raise EmptyCell(
            f"EmptyCell: all {len(records)} replications failed at tau={records[0].tau}"
        )
    first = successful[0]
    count = len(successful)
    errors = np.array([record.beta_hat - record.true_slope for record in successful])
    return StudyCell(
        n_units=first.n_units,
        n_periods=first.n_periods,
        tau=first.tau,
        bias=float(pairwise_sum(errors)) / count,
        rmse=math.sqrt(float(pairwise_sum(errors**2)) / count),
        coverage_robust=sum(record.covered_robust for record in successful) / count,
        coverage_standard=sum(record.covered_standard for record in successful) / count,
        mean_ci_width_robust=float(
            pairwise_sum([record.ci_width_robust for record in successful])
        ) / count,
        mean_ci_width_standard=float(
            pairwise_sum([record.ci_width_standard for record in successful])
        ) / count,
        n_failed=len(records) - count,
    )


def _replication_failed(study: StudyConfig, index: int, error: Exception) -> List[ReplicationRecord]:
    return [_failed_record(study, index, tau, str(error)) for tau in study.dgp.taus]


def collect_records(study: StudyConfig) -> List[List[ReplicationRecord]]:
    """Run every replication of a study; the outer list is in replication order."""
    handler = StudyHandler(study.workers)
    logging.info(
        "Running %s replications at N=%s, T=%s on %s worker(s)",
        study.replications,
        study.dgp.n_units,
        study.dgp.n_periods,
        handler.workers,
    )
    return handler.run(
        partial(run_replication, study),
        study.replications,
        partial(_replication_failed, study),
    )


def run_study(study: StudyConfig) -> StudyReport:
    """
    Run all replications and fold them, in replication order, into one cell
    per quantile level. The result does not depend on the worker count.
    """
    per_replication = collect_records(study)
    report = StudyReport()
    for position, tau in enumerate(study.dgp.taus):
        records = [records[position] for records in per_replication]
        try:
            report.cells.append(aggregate(records))
        except EmptyCell:
            raise StudyAborted(study.dgp.n_units, study.dgp.n_periods, tau)
    return report


def normality_diagnostic(
    beta_hats: Sequence[float], truth: float, std_errors: Sequence[float]
) -> float:
    """Kolmogorov-Smirnov distance of (beta_hat - truth) / se from N(0, 1)."""
    standardized = (np.asarray(beta_hats, dtype=float) - truth) / np.asarray(std_errors, dtype=float)
    return float(stats.kstest(standardized, "norm").statistic)
