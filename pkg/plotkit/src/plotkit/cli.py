"""plotkit command line: overlay statistics figures from stats CSV files."""

import argparse
import os
import sys

from .figures import PANELS, PanelNameError, render_statistics_figure
from .loading import SchemaError, load_runs

DEFAULT_PANELS = ("kinetic_energy", "enstrophy", "taylor_microscale",
                  "turbulence_intensity", "k_avg")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plotkit", description="render statistics figures from stats CSVs")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="stats CSV files, one per run")
    parser.add_argument("--stats", nargs="+", default=list(DEFAULT_PANELS),
                        help=f"statistics to render (default: all of {', '.join(DEFAULT_PANELS)})")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--format", choices=["png", "svg"], default="png")
    args = parser.parse_args(argv)

    try:
        bundles = load_runs(args.inputs)
    except (SchemaError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    os.makedirs(args.out, exist_ok=True)
    written = []
    for panel in args.stats:
        try:
            path = render_statistics_figure(
                bundles, panel, os.path.join(args.out, f"{panel}.{args.format}"),
                fmt=args.format)
        except PanelNameError as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
        if path is not None:
            written.append(path)
            print(f"wrote {path}")
    if not written:
        print("no data rows; nothing rendered")
    return 0


if __name__ == "__main__":
    sys.exit(main())
