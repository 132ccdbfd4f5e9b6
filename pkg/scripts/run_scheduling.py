#!/usr/bin/env python3
"""Estimation sum-MSE of the pilot schedulers versus pilot length.

Compares the greedy scheduler against exhaustive search, random
scheduling, and the contamination-free floor on a K=6 instance where the
enumeration is tractable.
"""
import argparse

from d2dmimo import ExperimentSpec, SystemConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--out", default="results/fig3.csv")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cfg = SystemConfig(n_d2d=6, pilot_len=8, pzf_bs=(4, 3), pzf_d2d=(1, 2),
                       rng_seed=args.seed)
    spec = ExperimentSpec(
        experiment="fig3", sweep_variable="pilot_len",
        sweep_values=[7, 8, 9, 10, 11], trials=args.trials, config=cfg,
        output=args.out,
    )
    rows, _ = run_experiment(spec, workers=args.workers)
    print(f"wrote {args.out} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
