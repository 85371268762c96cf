#!/usr/bin/env python3
"""Hybrid-vs-baseline comparison: warm-started solver against Adadelta.

For each seed, trains (a) an Adadelta baseline and (b) the hybrid that
warm-starts the deterministic smoothing solver from an Adadelta run, on
the same synthetic problem, and reports final train/test reconstruction
errors per seed plus the medians and hybrid/baseline ratios.

Example:
    python3 scripts/hybrid_vs_adadelta.py --seeds 1-10 --out runs/hybrid.csv
"""

from __future__ import annotations

import argparse
import csv
import statistics
import time

from spgae.data import SynthSpec, generate
from spgae.model import ModelParams, ProblemData
from spgae.sgd import SgdConfig, sgd_run, spg_ada


def parse_seeds(text: str) -> list[int]:
    """Accept '1,2,3', '1 2 3', or an inclusive range '1-10'."""
    text = text.strip()
    if "-" in text and "," not in text and " " not in text:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.replace(",", " ").split()]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        description="compare the warm-started hybrid against an Adadelta baseline")
    ap.add_argument("--n", type=int, default=1000, help="training samples")
    ap.add_argument("--n1", type=int, default=20, help="hidden width")
    ap.add_argument("--n0", type=int, default=5, help="input dimension")
    ap.add_argument("--ntest", type=int, default=300, help="test samples")
    ap.add_argument("--datatype", type=int, default=1, choices=(1, 2))
    ap.add_argument("--eps0", type=float, default=0.05)
    ap.add_argument("--seeds", default="1-10",
                    help="seed list or inclusive range (default 1-10)")
    ap.add_argument("--baseline-epochs", type=int, default=100,
                    help="Adadelta baseline epoch budget (default 100)")
    ap.add_argument("--warmstart-epochs", type=int, default=1000,
                    help="Adadelta epochs before the solver handoff (default 1000)")
    ap.add_argument("--out", default=None, help="optional per-seed CSV path")
    args = ap.parse_args(argv)

    seeds = parse_seeds(args.seeds)
    rows = []
    t0 = time.perf_counter()
    for seed in seeds:
        spec = SynthSpec(kind=args.datatype, n_train=args.n, n_test=args.ntest,
                         n_visible=args.n0, eps0=args.eps0, seed=seed)
        train_X, test_X = generate(spec)
        data = ProblemData.from_matrix(train_X, args.n1)
        params = ModelParams.from_data(data)
        test = test_X if test_X.shape[1] else None

        _, btrace = sgd_run(
            data, params,
            SgdConfig(method="adadelta", epochs=args.baseline_epochs, seed=seed),
            test_X=test)
        _, htrace = spg_ada(data, params, ada_epochs=args.warmstart_epochs,
                            seed=seed, test_X=test)

        row = {
            "seed": seed,
            "baseline_train": btrace.rows[-1].trainerr,
            "baseline_test": btrace.rows[-1].testerr,
            "hybrid_train": htrace.rows[-1].trainerr,
            "hybrid_test": htrace.rows[-1].testerr,
        }
        rows.append(row)
        print(f"seed {seed:3d}: baseline {row['baseline_train']:.4e}/"
              f"{row['baseline_test']:.4e}  hybrid {row['hybrid_train']:.4e}/"
              f"{row['hybrid_test']:.4e}")

    def med(key):
        return statistics.median(r[key] for r in rows)

    mb_train, mb_test = med("baseline_train"), med("baseline_test")
    mh_train, mh_test = med("hybrid_train"), med("hybrid_test")
    elapsed = time.perf_counter() - t0
    print(f"medians: baseline {mb_train:.4e}/{mb_test:.4e}  "
          f"hybrid {mh_train:.4e}/{mh_test:.4e}")
    print(f"hybrid/baseline ratios: train {mh_train / mb_train:.3f}  "
          f"test {mh_test / mb_test:.3f}  ({elapsed:.0f}s)")

    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"per-seed table: {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
