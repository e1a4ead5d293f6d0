"""Figure rendering command line: render --figure <id> --inputs <glob> --out <path>."""

from __future__ import annotations

import argparse
import glob
import sys

from .render import FIGURE_IDS, FigureSpec, SchemaError, band_containment, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figurekit", description="Render figures from harness CSV outputs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser("render", help="render one figure")
    p_render.add_argument("--figure", required=True, choices=FIGURE_IDS)
    p_render.add_argument("--inputs", required=True,
                          help="glob of input CSV files")
    p_render.add_argument("--out", required=True, help="output image path")
    p_render.add_argument("--stat", default="risk",
                          help="trajectory column for curve figures")
    p_render.add_argument("--title")
    p_render.set_defaults(func=_cmd_render)

    p_band = sub.add_parser("band-containment",
                            help="fraction of the band containing the theory curve")
    p_band.add_argument("--inputs", required=True, help="glob of seed CSVs")
    p_band.add_argument("--reference", required=True, help="theory CSV")
    p_band.add_argument("--stat", default="risk")
    p_band.set_defaults(func=_cmd_band)
    return parser


def _expand(pattern: str) -> list:
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise SchemaError(f"no inputs match {pattern!r}")
    return paths


def _cmd_render(args) -> int:
    spec = FigureSpec(figure=args.figure, inputs=_expand(args.inputs),
                      out=args.out, stat=args.stat, title=args.title)
    path = render(spec)
    print(f"wrote {path}")
    return 0


def _cmd_band(args) -> int:
    frac = band_containment(_expand(args.inputs), args.reference, args.stat)
    print(f"band containment: {frac:.3f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
