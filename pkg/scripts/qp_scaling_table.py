#!/usr/bin/env python3
"""Inner-solver scaling table: time the quadratic subproblem solver.

Runs the splitting solver on a ladder of instance sizes (the standard
benchmark rows by default) and prints one line per instance with the
constraint-system size N2, sweep count, wall time, final squared-delta
residual, and — where the instance is small enough for the dense
reference solver — the objective gap to the reference optimum and the
KKT residual of the returned point.

Example:
    python3 scripts/qp_scaling_table.py --max-n2 200000 --out runs/qp_bench.csv
    python3 scripts/qp_scaling_table.py --sizes 100:5:5,1000:100:10 --tol 1e-8
"""

from __future__ import annotations

import argparse

from spgae.cli import main as cli_main


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        description="time the quadratic subproblem solver on standard sizes")
    ap.add_argument("--sizes", default=None,
                    help="comma list of N:N1:N0 triples (default: built-in ladder)")
    ap.add_argument("--max-n2", dest="max_n2", type=int, default=200000,
                    help="skip instances whose N2 exceeds this (default 200000)")
    ap.add_argument("--tol", type=float, default=1e-6,
                    help="squared-delta stopping tolerance (default 1e-6)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="optional CSV output path")
    args = ap.parse_args(argv)

    argv_out = ["qp-bench", "--max-n2", str(args.max_n2),
                "--tol", str(args.tol), "--seed", str(args.seed)]
    if args.sizes:
        argv_out += ["--sizes", args.sizes]
    if args.out:
        argv_out += ["--out", args.out]
    return cli_main(argv_out)


if __name__ == "__main__":
    raise SystemExit(main())
