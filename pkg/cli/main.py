"""Command-line entry point: fit, simulate and generate."""

import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from cli.commands import fit, generate, simulate
from cli.exit_codes import EXIT_OK, EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feqr",
        description="Fixed-effects panel quantile regression with common-shock-robust inference.",
    )
    subcommands = parser.add_subparsers(dest="command", required=True)
    for module in (fit, simulate, generate):
        module.add_parser(subcommands)
    return parser


def configure_logging() -> None:
    logging.basicConfig(
        level=os.environ.get("FEQR_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
