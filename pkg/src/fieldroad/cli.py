"""Console script for fieldroad."""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from .experiments import (
    CONFIG_ERROR_STATUS,
    Command,
    execute,
    load_document,
    parse_config,
    write_error,
)

logger = logging.getLogger("fieldroad")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldroad",
        description="Run field-road diffusion experiments and write their results as CSV.",
    )
    parser.add_argument("command", choices=[c.value for c in Command], help="Experiment to run.")
    parser.add_argument("--config", required=True, type=Path, help="Experiment document (JSON or YAML).")
    parser.add_argument("--out", type=Path, default=None, help="Output CSV path.")
    parser.add_argument("--seed", type=int, default=None, help="Seed for stochastic oracles.")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """
    Console script: `fieldroad <command> --config <path> [--out <path>] [--seed <n>] [--verbose]`.

    The command line wins over the document for the command, the output path
    and the seed.
    """
    args = _parser().parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )
    logging.captureWarnings(True)

    try:
        document = load_document(args.config.read_text())
        if document.get("command", args.command) != args.command:
            logger.warning(
                "Command '%s' replaces '%s' from %s", args.command, document["command"], args.config
            )
        document["command"] = args.command
        if args.out is not None:
            document["output_path"] = str(args.out)
        if args.seed is not None:
            document["seed"] = args.seed
        spec = parse_config(document)
    except (OSError, ValueError) as e:
        # pydantic.ValidationError is a ValueError
        print(f"Invalid experiment document {args.config}: {e}", file=sys.stderr)
        if args.out is not None and args.out.parent.exists():
            write_error(args.out, e)
        return CONFIG_ERROR_STATUS

    return execute(spec)
