"""`generate` subcommand: write one synthetic panel as CSV."""

import argparse
import logging

from cli.exit_codes import EXIT_OK, EXIT_USAGE
from common.errors import ConfigError
from common.feqr_config import DgpConfig
from common.panel import save_panel
from simulation.dgp import generate_panel


def run(args: argparse.Namespace) -> int:
    try:
        dgp = DgpConfig(
            n_units=args.n,
            n_periods=args.t,
            beta=args.beta,
            gamma_scale=args.gamma,
            common_shock=not args.no_common_shock,
            base_seed=args.seed,
        )
    except ConfigError as e:
        logging.error("ConfigError: %s", e)
        return EXIT_USAGE

    save_panel(generate_panel(dgp, 0), args.out)
    logging.info("Wrote %sx%s panel to %s", dgp.n_units, dgp.n_periods, args.out)
    return EXIT_OK


def add_parser(subcommands) -> None:
    parser = subcommands.add_parser("generate", help="generate a synthetic panel")
    parser.add_argument("--n", type=int, required=True, help="number of units")
    parser.add_argument("--t", type=int, required=True, help="number of periods")
    parser.add_argument("--seed", type=int, default=0, help="base seed")
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--gamma", type=float, default=0.2, help="location-scale coefficient")
    parser.add_argument("--no-common-shock", action="store_true",
                        help="drop the period shock (independent errors)")
    parser.add_argument("--out", required=True, help="destination CSV")
    parser.set_defaults(handler=run)
