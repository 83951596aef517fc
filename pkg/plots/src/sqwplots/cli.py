"""Command line front end: render --kind decay --in decay.csv --out decay.svg"""

from __future__ import annotations

import argparse
import sys

from .render import SCHEMAS, PlotJob, SchemaError, render


def _parser():
    parser = argparse.ArgumentParser(
        prog="render",
        description="Draw a figure from an experiment CSV without recomputing anything.",
    )
    parser.add_argument("--kind", required=True, choices=sorted(SCHEMAS),
                        help="which figure to draw")
    parser.add_argument("--in", dest="source", required=True, metavar="CSV",
                        help="input table")
    parser.add_argument("--out", dest="target", required=True, metavar="FILE",
                        help="output image; format follows the extension (.svg, .png, ...)")
    parser.add_argument("--dpi", type=int, default=150,
                        help="raster resolution (ignored for SVG)")
    scale = parser.add_mutually_exclusive_group()
    scale.add_argument("--log-y", dest="log_y", action="store_true", default=None)
    scale.add_argument("--linear-y", dest="log_y", action="store_false", default=None)
    return parser


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    job = PlotJob(source=args.source, kind=args.kind, target=args.target,
                  log_y=args.log_y, dpi=args.dpi)
    try:
        render(job)
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
