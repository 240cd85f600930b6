"""
Command-line entry point.

    qutrit-battery <command> [--config PATH] [--out DIR] [--seed N]
                   [--threshold F] [--dt SEC] [--set key=value ...]

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 integration error, 4 solver error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config, parse_value
from .errors import (
    ConfigError,
    FitError,
    InvalidInputError,
    NoConvergenceError,
    NotCriticalError,
    StepSizeError,
)
from .experiments import COMMANDS

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTEGRATION, EXIT_SOLVER = 0, 1, 2, 3, 4

log = logging.getLogger("qutrit_battery")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qutrit-battery", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON file of dotted config keys")
    parser.add_argument("--out", help="output directory (run.output_dir)")
    parser.add_argument("--seed", type=int, help="seed for sampled measurements (run.seed)")
    parser.add_argument("--threshold", type=float, help="charged fraction of E_max (charge.threshold)")
    parser.add_argument("--dt", type=float, help="integration step in seconds (charge.dt_s)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key; VALUE is parsed as JSON when possible")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = parse_value(value)
    for key, value in (("run.output_dir", args.out), ("run.seed", args.seed),
                       ("charge.threshold", args.threshold), ("charge.dt_s", args.dt)):
        if value is not None:
            out[key] = value
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config, _overrides(args))
        files = COMMANDS[args.command](config)
    except ConfigError as exc:
        log.error("configuration: %s", exc)
        return EXIT_USAGE
    except OSError as exc:
        log.error("i/o: %s", exc)
        return EXIT_IO
    except StepSizeError as exc:
        log.error("integration: %s", exc)
        return EXIT_INTEGRATION
    except (NoConvergenceError, NotCriticalError, FitError) as exc:
        log.error("solver: %s", exc)
        return EXIT_SOLVER
    except InvalidInputError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_USAGE
    log.info("%s: wrote %d files under %s", args.command, len(files), config.output_dir / args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
