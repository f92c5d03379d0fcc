"""Command-line front end: plots history|snapshot|contour <csv...> -o <file>."""

import argparse
import os
import sys

from .plots import SchemaError, plot_contour, plot_history, plot_snapshot

EXIT_OK = 0
EXIT_CONFIG = 2


def _default_out(first_csv, kind):
    stem = os.path.splitext(os.path.basename(first_csv))[0]
    return f"{stem}_{kind}.svg"


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from solver harness CSV output.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_hist = sub.add_parser(
        "history", help="energy/charge drift or L2-error time history"
    )
    p_hist.add_argument("csv", help="energy or error history CSV")
    p_hist.add_argument("-o", "--output", default=None, help="output image")

    p_snap = sub.add_parser("snapshot", help="solution profile at one time")
    p_snap.add_argument(
        "csv",
        nargs="+",
        help="snapshot CSV, optionally followed by a reference snapshot "
        "CSV to overlay",
    )
    p_snap.add_argument("-o", "--output", default=None, help="output image")

    p_cont = sub.add_parser(
        "contour", help="space-time view from a snapshot series"
    )
    p_cont.add_argument("csv", nargs="+", help="two or more snapshot CSVs")
    p_cont.add_argument("-o", "--output", default=None, help="output image")
    p_cont.add_argument(
        "--style",
        choices=("contour", "waterfall"),
        default="contour",
        help="filled contour (default) or offset waterfall profiles",
    )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "history":
            out = args.output or _default_out(args.csv, "history")
            written = plot_history(args.csv, out)
        elif args.command == "snapshot":
            if len(args.csv) > 2:
                print(
                    "snapshot takes one CSV plus at most one reference CSV",
                    file=sys.stderr,
                )
                return EXIT_CONFIG
            reference = args.csv[1] if len(args.csv) == 2 else None
            out = args.output or _default_out(args.csv[0], "snapshot")
            written = plot_snapshot(args.csv[0], out, reference=reference)
        else:
            out = args.output or _default_out(args.csv[0], "contour")
            written = plot_contour(args.csv, out, style=args.style)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {written}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
