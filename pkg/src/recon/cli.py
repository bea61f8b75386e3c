"""Command line front end.

``recon bench`` sweeps algorithms over a Jaccard grid and writes the metrics
CSV; ``recon run`` executes a single point and prints a JSON summary, with an
optional JSONL transcript dump (one message per line).
"""

from __future__ import annotations

import argparse
import json
import sys

from recon.bench import SweepSpec, parse_grid, run_single, run_sweep


def _sizes(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi or lo)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="recon", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="sweep algorithms over a similarity grid into a CSV")
    b.add_argument("--algos", required=True,
                   help="comma list, e.g. hybrid,riblt,sbf:0.01,optimal-sbf,full-state,pinsketch")
    b.add_argument("--n", type=int, default=100_000, help="per-replica cardinality")
    b.add_argument("--jaccard-grid", default="0:1:0.05", help="start:stop:step, inclusive")
    b.add_argument("--reps", type=int, default=30)
    b.add_argument("--seed", type=int, default=42)
    b.add_argument("--sizes", type=_sizes, default=(5, 80), help="element byte-length range lo:hi")
    b.add_argument("--out", required=True, help="output CSV path")
    b.add_argument("--no-timing", action="store_true",
                   help="leave encode_ms/decode_ms empty so reruns are byte-identical")
    b.add_argument("--verify", action="store_true",
                   help="check every run reconciles to the exact union")
    b.add_argument("--overshoot", type=int, default=0,
                   help="extra wasted slices per stream, modeling stop-signal latency")

    r = sub.add_parser("run", help="run one point and print a JSON summary")
    r.add_argument("--algo", required=True)
    r.add_argument("--n", type=int, default=100_000)
    r.add_argument("--jaccard", type=float, required=True)
    r.add_argument("--seed", type=int, default=42)
    r.add_argument("--sizes", type=_sizes, default=(5, 80))
    r.add_argument("--transcript", default=None, help="write the message log as JSONL")
    r.add_argument("--overshoot", type=int, default=0)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bench":
        spec = SweepSpec(
            algorithms=[a.strip() for a in args.algos.split(",") if a.strip()],
            jaccard_grid=parse_grid(args.jaccard_grid),
            reps=args.reps,
            n=args.n,
            seed=args.seed,
            size_range=args.sizes,
            timing=not args.no_timing,
            verify=args.verify,
            overshoot_slices=args.overshoot,
        )
        rows = run_sweep(spec, args.out)
        failed = sum(r["failed"] for r in rows)
        print(f"wrote {args.out}: {len(rows)} runs, {failed} failed")
        return 1 if failed else 0
    summary = run_single(
        args.algo, args.n, args.jaccard, args.seed,
        size_range=args.sizes,
        transcript_path=args.transcript,
        overshoot_slices=args.overshoot,
    )
    json.dump(summary, sys.stdout, indent=2)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
