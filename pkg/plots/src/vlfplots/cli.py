"""Command-line entry point: render charts from simulation output folders."""
from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_IDS, FigureSpec, default_inputs, render


def _parse_pair(text: str, flag: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise SystemExit(f"{flag}: expected 'lo,hi', got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise SystemExit(f"{flag}: expected numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlfcc-plots",
        description="Render static charts from vlfcc CSV outputs.")
    sub = parser.add_subparsers(dest="command", required=True)
    rend = sub.add_parser("render", help="render one figure")
    rend.add_argument("--figure", required=True, choices=FIGURE_IDS)
    rend.add_argument("--in", dest="in_dir", required=True,
                      help="directory holding the input CSV files")
    rend.add_argument("--out", dest="out_dir", required=True)
    rend.add_argument("--formats", default="svg,png",
                      help="comma-separated subset of svg,png")
    rend.add_argument("--input", action="append", default=[],
                      metavar="ROLE=PATH",
                      help="override one input path (repeatable)")
    rend.add_argument("--xlim", default=None, metavar="LO,HI")
    rend.add_argument("--ylim", default=None, metavar="LO,HI")
    sub.add_parser("list", help="list figure ids")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for fid in FIGURE_IDS:
            print(fid)
        return 0
    inputs = default_inputs(args.figure, args.in_dir)
    for item in args.input:
        role, sep, path = item.partition("=")
        if not sep or not path:
            print(f"--input: expected ROLE=PATH, got {item!r}", file=sys.stderr)
            return 2
        inputs[role] = (path,) if role == "trace" else path
    try:
        spec = FigureSpec(
            figure=args.figure, inputs=inputs,
            xlim=None if args.xlim is None else _parse_pair(args.xlim, "--xlim"),
            ylim=None if args.ylim is None else _parse_pair(args.ylim, "--ylim"))
        paths = render(spec, args.out_dir,
                       formats=tuple(args.formats.split(",")))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
