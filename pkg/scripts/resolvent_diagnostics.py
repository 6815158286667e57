#!/usr/bin/env python3
"""Resolvent self-tests: minor identities, local-law ratios, rigidity.

    python3 scripts/resolvent_diagnostics.py --N 400
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

import numpy as np

from mpvesd.cli import _write_rows
from mpvesd.ensembles import EntryLaw, sample_X
from mpvesd.experiments import ExperimentConfig, run_locallaw, run_rigidity
from mpvesd.resolvent import verify_resolvent_identities


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=400)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--out-dir", default="out")
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    worst = 0.0
    for k in range(100):
        X = sample_X(10, 10, EntryLaw("gaussian"), (args.seed, k))
        worst = max(worst, verify_resolvent_identities(
            X, None, 1.0 + 1.0j, rng=np.random.default_rng(k)))
    print(f"identities: max residual {worst:.2e} over 100 instances")

    cfg = ExperimentConfig(family="locallaw", d=2.0, trials=args.trials,
                           seed=args.seed,
                           params={"N": args.N, "E": 1.0,
                                   "etas": [args.N ** -0.5]})
    res = run_locallaw(cfg, jobs=args.jobs)
    rows = [(r["E"], r["eta"], r["statistic"], r["value"], r["envelope"])
            for r in res.extras["rows"]]
    path = os.path.join(args.out_dir, "locallaw_residuals.csv")
    _write_rows(path, ("E", "eta", "statistic", "value", "envelope"), rows)
    ratios = [r["value"] / r["envelope"] for r in res.extras["rows"]
              if r["statistic"] == "averaged_m2"]
    frac = np.mean(np.array(ratios) < 10.0)
    print(f"local law: averaged ratio < 10 in {100 * frac:.0f}% of trials "
          f"-> {path}")

    cfg = ExperimentConfig(family="rigidity", d=2.0, trials=args.trials,
                           seed=args.seed + 1, params={"N": 500})
    res = run_rigidity(cfg, jobs=args.jobs)
    med = float(np.median(res.extras["maxima"]))
    print(f"rigidity: median max scaled deviation {med:.2f} over "
          f"{args.trials} trials")


if __name__ == "__main__":
    main()
