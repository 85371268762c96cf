#!/usr/bin/env python3
"""Convergence study: run the smoothing solver across seeds and aggregate.

Trains on one synthetic problem family with several seeds, writes a
trace CSV per seed (objective, smoothed objective, coupling-slack
feasibility, train/test error per outer iteration), and aggregates the
traces into median / quartile series ready for external plotting.

Example:
    python3 scripts/run_convergence_study.py --preset 6 --datatype 1 \
        --eps0 0.05 --seeds 0,1,2 --out runs/convergence
"""

from __future__ import annotations

import argparse
import pathlib

from spgae.cli import main as cli_main


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        description="run the smoothing solver across seeds and aggregate traces")
    ap.add_argument("--preset", type=int, default=6,
                    help="problem-size preset id (default 6)")
    ap.add_argument("--datatype", type=int, default=1, choices=(1, 2))
    ap.add_argument("--eps0", type=float, default=0.05,
                    help="synthetic noise level (default 0.05)")
    ap.add_argument("--ntest", type=int, default=0,
                    help="held-out test sample count (default 0)")
    ap.add_argument("--seeds", default="0,1,2",
                    help="comma/space separated seed list (default 0,1,2)")
    ap.add_argument("--method", default="spg",
                    help="spg, spg-ada, or an SGD method name (default spg)")
    ap.add_argument("--max-iters", dest="max_iters", type=int, default=4000)
    ap.add_argument("--workers", type=int, default=1,
                    help="parallel seed workers (default 1)")
    ap.add_argument("--out", default="runs/convergence",
                    help="output directory (default runs/convergence)")
    args = ap.parse_args(argv)

    out = pathlib.Path(args.out)
    rc = cli_main([
        "train", "--method", args.method,
        "--preset", str(args.preset), "--datatype", str(args.datatype),
        "--eps0", str(args.eps0), "--ntest", str(args.ntest),
        "--seeds", args.seeds, "--workers", str(args.workers),
        "--max-iters", str(args.max_iters), "--out", str(out),
    ])
    if rc:
        return rc

    seeds = [int(s) for s in args.seeds.replace(",", " ").split()]
    if len(seeds) == 1:
        traces = [out / "trace.csv"]
    else:
        traces = [out / f"seed_{s}" / "trace.csv" for s in seeds]

    aggregate = out / "aggregate.csv"
    rc = cli_main(["report", "--traces", *map(str, traces),
                   "--out", str(aggregate)])
    if rc:
        return rc
    print(f"per-seed traces: {', '.join(map(str, traces))}")
    print(f"aggregate series: {aggregate}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
