"""Command line front end.

One subcommand per estimator; every subcommand takes the same flags.  Exit
status: 0 all asserted checks passed, 1 an assertion failed, 2 usage or
config error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .runner import run

_SUBCOMMANDS = ("build", "spectrum", "ec", "fracmom", "specavg", "gapprob",
                "decay", "dynloc", "check-identities", "check-fmec")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sqwlab",
        description="Disorder-averaged scattering walk experiments on finite digraphs.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run {name.replace('-', ' ')}")
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None,
                       help="override the output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker thread count (default: config, then cpu count)")
        p.add_argument("--quiet", action="store_true",
                       help="suppress progress lines")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        config = parse_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        return run(config, only=args.command.replace("-", "_"), out_dir=args.out,
                   seed=args.seed, threads=args.threads, quiet=args.quiet)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
