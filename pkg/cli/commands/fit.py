"""`fit` subcommand: FEQR estimates with robust and standard intervals."""

import argparse
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from cli.exit_codes import EXIT_DATA, EXIT_ESTIMATION, EXIT_OK, EXIT_USAGE
from common.errors import FeqrError, InvalidQuantile, PanelError
from common.factory import CovarianceFactory
from common.feqr_config import CiMethod, SolverOptions, check_taus
from common.panel import PanelData, load_panel, validate
from estimators import covariance  # noqa: F401  registers the covariance estimators
from estimators.inference import ConfidenceInterval, confidence_intervals
from estimators.solver import FeqrFit, fit_path

CSV_COLUMNS = [
    "tau",
    "kind",
    "method",
    "index",
    "estimate",
    "std_error",
    "lower",
    "upper",
    "level",
    "bandwidth",
    "certificate_passes",
]


@dataclass
class FitReport:
    tau: float
    beta_hat: List[float]
    objective_value: float
    certificate: Dict[str, Any]
    std_errors: Dict[str, List[float]] = field(default_factory=dict)
    intervals: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    bandwidth: Dict[str, float] = field(default_factory=dict)
    alpha_hat: Optional[List[float]] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FitReport":
        return cls(**data)

    def confidence_intervals(self, method: CiMethod) -> List[ConfidenceInterval]:
        return [
            ConfidenceInterval(**{**entry, "method": CiMethod(entry["method"])})
            for entry in self.intervals.get(method.value, [])
        ]


def build_report(
    panel: PanelData,
    fit: FeqrFit,
    methods: List[CiMethod],
    level: float,
    include_alphas: bool,
) -> FitReport:
    report = FitReport(
        tau=fit.tau,
        beta_hat=[float(b) for b in fit.beta_hat],
        objective_value=fit.objective_value,
        certificate=asdict(fit.certificate),
        alpha_hat=[float(a) for a in fit.alpha_hat] if include_alphas else None,
    )
    for method in methods:
        estimate = CovarianceFactory.create(method, panel, fit).estimate()
        intervals = confidence_intervals(fit, estimate, level)
        report.std_errors[method.value] = [ci.std_error for ci in intervals]
        report.intervals[method.value] = [
            {**asdict(ci), "method": ci.method.value} for ci in intervals
        ]
        report.bandwidth[method.value] = estimate.bandwidth
    return report


def render_text(reports: List[FitReport], unit_ids) -> str:
    lines = []
    for report in reports:
        cert = report.certificate
        lines.append(f"tau = {report.tau:g}")
        lines.append(f"  objective       {report.objective_value:.10g}")
        lines.append(
            f"  certificate     passes={cert['passes']} max_h1={cert['max_h1']:.4g}"
            f" (<= {cert['bound_h1']:.4g}) h2={cert['h2_norm']:.4g} (<= {cert['bound_h2']:.4g})"
        )
        for method, intervals in report.intervals.items():
            lines.append(f"  [{method}] bandwidth={report.bandwidth[method]:.4g}")
            for ci in intervals:
                lines.append(
                    f"    beta[{ci['coefficient_index']}] = {ci['estimate']:.6f}"
                    f"  se={ci['std_error']:.6f}"
                    f"  {ci['level']:.0%} CI [{ci['lower']:.6f}, {ci['upper']:.6f}]"
                )
        if report.alpha_hat is not None:
            for unit, alpha in zip(unit_ids, report.alpha_hat):
                lines.append(f"  alpha[{unit}] = {alpha:.6f}")
    return "\n".join(lines) + "\n"


def render_csv(reports: List[FitReport], unit_ids) -> str:
    rows = []
    for report in reports:
        passes = report.certificate["passes"]
        for method, intervals in report.intervals.items():
            for ci in intervals:
                rows.append(
                    [report.tau, "beta", method, ci["coefficient_index"], ci["estimate"],
                     ci["std_error"], ci["lower"], ci["upper"], ci["level"],
                     report.bandwidth[method], passes]
                )
        if report.alpha_hat is not None:
            for unit, alpha in zip(unit_ids, report.alpha_hat):
                rows.append(
                    [report.tau, "alpha", "", unit, alpha,
                     np.nan, np.nan, np.nan, np.nan, np.nan, passes]
                )
    buffer = io.StringIO()
    pd.DataFrame(rows, columns=CSV_COLUMNS).to_csv(
        buffer, index=False, float_format="%.17g", lineterminator="\n"
    )
    return buffer.getvalue()


def run(args: argparse.Namespace) -> int:
    try:
        taus = check_taus(args.tau)
    except InvalidQuantile as e:
        logging.error("%s", e)
        return EXIT_USAGE
    if not 0.0 < args.level < 1.0:
        logging.error("InvalidArgument: --level must lie in (0, 1), got %s", args.level)
        return EXIT_USAGE
    methods = (
        [CiMethod.ROBUST, CiMethod.STANDARD] if args.method == "both" else [CiMethod(args.method)]
    )

    try:
        panel = load_panel(args.data)
    except PanelError as e:
        logging.error("%s", e)
        return EXIT_DATA
    violations = validate(panel)
    if violations:
        for violation in violations:
            logging.error("%s at %s: %s", violation.kind.value, violation.location, violation.message)
        return EXIT_DATA

    try:
        fits = fit_path(panel, taus, SolverOptions())
        for fit in fits:
            fit.raise_for_status()
        reports = [build_report(panel, fit, methods, args.level, args.alphas) for fit in fits]
    except FeqrError as e:
        logging.error("%s", e)
        return EXIT_ESTIMATION

    if args.json:
        output = json.dumps({"reports": [r.to_dict() for r in reports]}, indent=2) + "\n"
    elif args.csv:
        output = render_csv(reports, panel.unit_ids)
    else:
        output = render_text(reports, panel.unit_ids)
    sys.stdout.write(output)
    return EXIT_OK


def add_parser(subcommands) -> None:
    parser = subcommands.add_parser("fit", help="fit FEQR and report confidence intervals")
    parser.add_argument("--data", required=True, help="long-format panel CSV")
    parser.add_argument("--tau", type=float, action="append", required=True,
                        help="quantile level in (0, 1); repeatable")
    parser.add_argument("--level", type=float, default=0.95, help="confidence level")
    parser.add_argument("--method", choices=["robust", "standard", "both"], default="both")
    formats = parser.add_mutually_exclusive_group()
    formats.add_argument("--json", action="store_true", help="JSON output")
    formats.add_argument("--csv", action="store_true", help="CSV output")
    parser.add_argument("--alphas", action="store_true", help="also report unit intercepts")
    parser.set_defaults(handler=run)
