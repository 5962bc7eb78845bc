"""Command line figure renderer: --input/--output/--kind plus a linear-y
switch and a state selector for the simplex figure.  Emits PNG.  Exit
codes: 0 success, 1 bad input data, 2 usage error."""

from __future__ import annotations

import argparse
import sys

import matplotlib.pyplot as plt

from .renderers import KINDS, PlotError, PlotJob, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mfgplots", description="Render figures from solver CSV outputs")
    parser.add_argument("--input", action="append", required=True, metavar="CSV",
                        help="input CSV, repeatable for overlaid convergence traces")
    parser.add_argument("--output", required=True, metavar="PNG")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--linear-y", action="store_true",
                        help="linear instead of log y-axis")
    parser.add_argument("--state", type=int, default=0,
                        help="state whose rows the simplex figure shows")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        job = PlotJob(inputs=tuple(args.input), kind=args.kind, output=args.output,
                      log_y=not args.linear_y, state=args.state)
        fig = render(job)
        plt.close(fig)
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {job.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
