"""Run every CLI command with one configuration.

    python3 scripts/run_all.py [--out DIR] [--seed N] [--config PATH]
"""
import argparse
import sys
import time

from qutrit_battery.cli import main

COMMANDS = ("protocol", "brachistochrone", "charge", "discharge", "tomography")


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="out")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--config")
    args = parser.parse_args(argv)
    extra = ["--config", args.config] if args.config else []
    for command in COMMANDS:
        start = time.perf_counter()
        code = main([command, "--out", args.out, "--seed", str(args.seed), *extra])
        print(f"{command:<16} exit {code}  {time.perf_counter() - start:6.1f} s")
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
