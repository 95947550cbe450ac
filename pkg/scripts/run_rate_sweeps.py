#!/usr/bin/env python3
"""Rate sweeps for the two factor regimes.

Sweeps panel sizes, records the per-method squared error at random target
cells, and fits the log-log slope of the median error against N.  Expected
behavior: the doubly robust estimate decays near the parametric rate on
discrete factors and near N^(-2/3) on 2-d continuous factors, while the
vanilla single-side estimates sit close to N^(-1/2).

Usage:
    python scripts/run_rate_sweeps.py --out results/
    python scripts/run_rate_sweeps.py --quick          # small sizes, fast
"""

import argparse
import json
from pathlib import Path

from drnn.experiments import ExperimentConfig, run_sweep, write_results_csv

DISCRETE = {
    "factor": {"kind": "discrete", "d": 4, "m_unit": 5, "m_time": 5},
    "surface": {"kind": "bilinear"}, "sigma": 0.5, "p": 1.0,
}
CONTINUOUS = {
    "factor": {"kind": "continuous", "d": 2},
    "surface": {"kind": "bilinear"}, "sigma": 0.5, "p": 1.0,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--seed", type=int, default=20260808)
    ap.add_argument("--replications", type=int, default=100)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    sizes = [(64, 64), (128, 128)] if args.quick else \
        [(64, 64), (128, 128), (256, 256), (512, 512)]
    for name, gen in (("discrete", DISCRETE), ("continuous", CONTINUOUS)):
        cfg = ExperimentConfig(
            scenario="rate_sweep", sizes=sizes,
            replications=args.replications, generator=gen,
            methods=("unit", "time", "dr"), tuning={"mode": "validation"},
            targets_per_rep=8, base_seed=args.seed,
        )
        rows, summary = run_sweep(cfg)
        write_results_csv(rows, out / f"rate_{name}.csv")
        (out / f"rate_{name}_summary.json").write_text(
            json.dumps(summary, indent=2) + "\n"
        )
        for m, entry in summary["per_method"].items():
            print(f"[{name}] {m:5s} slope={entry['slope']:+.3f} "
                  f"(se {entry['slope_se']:.3f})")


if __name__ == "__main__":
    main()
