"""Study configuration files and report tables (CSV and text)."""

import itertools
import os
from typing import Dict, List, Optional

import pandas as pd
from dotenv import dotenv_values

from common.errors import ConfigError, FeqrError
from common.feqr_config import BandwidthRule, DgpConfig, ReportColumn, StudyConfig
from simulation.study import StudyReport

CONFIG_KEYS = (
    "beta",
    "gamma_scale",
    "n_units",
    "n_periods",
    "taus",
    "common_shock",
    "base_seed",
    "replications",
    "level",
    "bandwidth_rule",
    "workers",
)

_FLOAT_FORMAT = "%.17g"
_TABLE1_COLUMNS = [ReportColumn.BIAS, ReportColumn.RMSE]
_TABLE2_COLUMNS = [ReportColumn.COVERAGE_ROBUST, ReportColumn.COVERAGE_STANDARD]
_KEY_COLUMNS = [ReportColumn.N_UNITS, ReportColumn.N_PERIODS, ReportColumn.TAU]


def _int_list(raw: str, key: str) -> List[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"'{key}' must be a comma-separated list of integers, got '{raw}'")


def _parse_bool(raw: str, key: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"'{key}' must be a boolean, got '{raw}'")


def parse_study_config(
    values: Dict[str, Optional[str]],
    workers: Optional[int] = None,
    replications: Optional[int] = None,
) -> List[StudyConfig]:
    """
    Build one StudyConfig per (n_units, n_periods) cell of a flat key-value mapping.
    Explicit `workers` / `replications` arguments override the mapping.
    """
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown configuration keys {unknown}")
    for key in ("n_units", "n_periods"):
        if not values.get(key):
            raise ConfigError(f"missing required key '{key}'")
    try:
        taus = [float(part) for part in (values.get("taus") or "0.25,0.5,0.75").split(",")]
        beta = float(values.get("beta") or 1.0)
        gamma_scale = float(values.get("gamma_scale") or 0.2)
        base_seed = int(values.get("base_seed") or 0)
        level = float(values.get("level") or 0.95)
        configured_reps = int(values.get("replications") or 2000)
        configured_workers = int(values["workers"]) if values.get("workers") else None
        rule = BandwidthRule(values.get("bandwidth_rule") or BandwidthRule.SILVERMAN_N.value)
    except ValueError as e:
        raise ConfigError(f"invalid configuration value: {e}")
    common_shock = _parse_bool(values.get("common_shock") or "true", "common_shock")

    studies = []
    for n_units, n_periods in itertools.product(
        _int_list(values["n_units"], "n_units"), _int_list(values["n_periods"], "n_periods")
    ):
        try:
            dgp = DgpConfig(
                n_units=n_units,
                n_periods=n_periods,
                beta=beta,
                gamma_scale=gamma_scale,
                taus=taus,
                common_shock=common_shock,
                base_seed=base_seed,
            )
        except FeqrError as e:
            raise ConfigError(str(e))
        studies.append(
            StudyConfig(
                dgp=dgp,
                replications=configured_reps if replications is None else replications,
                level=level,
                bandwidth_rule=rule,
                workers=configured_workers if workers is None else workers,
            )
        )
    return studies


def load_study_configs(
    path: str, workers: Optional[int] = None, replications: Optional[int] = None
) -> List[StudyConfig]:
    """Read a key=value study file; n_units and n_periods may be comma lists."""
    if not os.path.isfile(path):
        raise ConfigError(f"configuration file '{path}' not found")
    return parse_study_config(dotenv_values(path), workers, replications)


def _pivot(frame: pd.DataFrame, columns: List[ReportColumn]) -> pd.DataFrame:
    wide = frame.pivot_table(
        index=[ReportColumn.N_UNITS.value, ReportColumn.N_PERIODS.value],
        columns=ReportColumn.TAU.value,
        values=[column.value for column in columns],
    )
    wide = wide.swaplevel(0, 1, axis=1).sort_index(axis=1, level=0, sort_remaining=False)
    return wide


def render_tables(report: StudyReport) -> str:
    """Text tables laid out like the bias/RMSE and coverage tables: rows (N, T), columns by tau."""
    frame = report.to_frame()
    if frame.empty:
        return ""
    bias_rmse = _pivot(frame, _TABLE1_COLUMNS)
    coverage = _pivot(frame, _TABLE2_COLUMNS)
    return "\n".join(
        [
            "Bias and RMSE of the FEQR slope",
            bias_rmse.to_string(float_format=lambda v: f"{v:.4f}"),
            "",
            "Coverage of robust and standard confidence intervals",
            coverage.to_string(float_format=lambda v: f"{v:.3f}"),
            "",
        ]
    )


def write_report(report: StudyReport, out_dir: str) -> Dict[str, str]:
    """Write report.csv, table1.csv, table2.csv and tables.txt; return their paths."""
    os.makedirs(out_dir, exist_ok=True)
    frame = report.to_frame()
    keys = [column.value for column in _KEY_COLUMNS]
    paths = {
        "report": os.path.join(out_dir, "report.csv"),
        "table1": os.path.join(out_dir, "table1.csv"),
        "table2": os.path.join(out_dir, "table2.csv"),
        "text": os.path.join(out_dir, "tables.txt"),
    }
    frame.to_csv(paths["report"], index=False, float_format=_FLOAT_FORMAT, lineterminator="\n")
    frame[keys + [column.value for column in _TABLE1_COLUMNS]].to_csv(
        paths["table1"], index=False, float_format=_FLOAT_FORMAT, lineterminator="\n"
    )
    frame[keys + [column.value for column in _TABLE2_COLUMNS]].to_csv(
        paths["table2"], index=False, float_format=_FLOAT_FORMAT, lineterminator="\n"
    )
    with open(paths["text"], "w", encoding="utf-8") as handle:
        handle.write(render_tables(report))
    return paths


def load_report(path: str) -> StudyReport:
    """Re-read a report.csv written by write_report."""
    return StudyReport.from_frame(pd.read_csv(path))
