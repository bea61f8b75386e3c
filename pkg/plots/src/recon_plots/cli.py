"""``plots`` command line: render one metric or the whole figure suite."""

from __future__ import annotations

import argparse
import sys

from recon_plots.figures import FIGURE_METRICS, FigureSpec, render, render_all


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plots", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", help="render one metric figure")
    r.add_argument("--csv", required=True)
    r.add_argument("--metric", required=True, choices=FIGURE_METRICS)
    r.add_argument("--out", required=True)
    r.add_argument("--algos", default=None, help="comma list; default: all in the CSV")
    r.add_argument("--log-y", action="store_true")
    r.add_argument("--log-x", action="store_true")

    a = sub.add_parser("all", help="render the full figure suite")
    a.add_argument("--csv", required=True)
    a.add_argument("--outdir", required=True)
    a.add_argument("--format", default="svg", choices=["svg", "png", "pdf"])
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "render":
            algos = [a.strip() for a in args.algos.split(",")] if args.algos else None
            s = render(
                args.csv,
                FigureSpec(
                    metric=args.metric,
                    out_path=args.out,
                    algorithms=algos,
                    log_y=args.log_y,
                    log_x=args.log_x,
                ),
            )
            print(f"wrote {s.out_path}: {s.n_series} series, {s.n_bands} bands")
            return 0
        for s in render_all(args.csv, args.outdir, args.format):
            print(f"wrote {s.out_path}: {s.n_series} series, {s.n_bands} bands")
        return 0
    except (ValueError, OSError) as exc:
        print(f"plots: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
