"""`simulate` subcommand: Monte Carlo study over a grid of (N, T) cells."""

import argparse
import logging
import sys

from cli.exit_codes import EXIT_ABORTED, EXIT_OK, EXIT_USAGE
from common.errors import ConfigError, StudyAborted
from simulation.report import load_study_configs, render_tables, write_report
from simulation.study import StudyReport, run_study


def run(args: argparse.Namespace) -> int:
    try:
        studies = load_study_configs(args.config, args.workers, args.replications)
    except ConfigError as e:
        logging.error("ConfigError: %s", e)
        return EXIT_USAGE

    report = StudyReport()
    for study in studies:
        try:
            report.extend(run_study(study))
        except StudyAborted as e:
            logging.error("%s", e)
            return EXIT_ABORTED
        except ConfigError as e:
            logging.error("ConfigError: %s", e)
            return EXIT_USAGE

    paths = write_report(report, args.out)
    logging.info("Wrote %s", ", ".join(paths.values()))
    sys.stdout.write(render_tables(report))
    return EXIT_OK


def add_parser(subcommands) -> None:
    parser = subcommands.add_parser("simulate", help="run a Monte Carlo study")
    parser.add_argument("--config", required=True, help="key=value study configuration file")
    parser.add_argument("--out", default="out", help="output directory for report and tables (default: out)")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker threads (overrides the config and FEQR_WORKERS)")
    parser.add_argument("--replications", type=int, default=None,
                        help="override the configured replication count")
    parser.set_defaults(handler=run)
