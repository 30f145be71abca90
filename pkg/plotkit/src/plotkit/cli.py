"""Command line front end: render one figure from report CSVs."""

from __future__ import annotations

import argparse
import logging
import sys

from .render import FigureSpec, PlotkitError, render


def _parse_point(text):
    try:
        a, b = text.split(",")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"equilibrium {text!r} is not of the form x,y")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="render verification report CSVs as a region map")
    parser.add_argument("--vertices", required=True,
                        help="vertex report CSV (x1,x2,c1_pass,c4_pass)")
    parser.add_argument("--simplices", required=True,
                        help="simplex table CSV (v0,v1,v2)")
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--points", default=None,
                        help="optional collocation point CSV (x1,x2)")
    parser.add_argument("--equilibria", nargs="*", type=_parse_point,
                        default=[], help="equilibrium markers as x,y pairs")
    parser.add_argument("--box", nargs=4, type=float, default=None,
                        metavar=("X0", "X1", "Y0", "Y1"),
                        help="axes limits; default is the meshed domain")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.WARNING)
    try:
        spec = FigureSpec(vertices_csv=args.vertices,
                          simplices_csv=args.simplices,
                          out=args.out, points_csv=args.points,
                          equilibria=args.equilibria,
                          box=tuple(args.box) if args.box else None)
        render(spec)
    except PlotkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
