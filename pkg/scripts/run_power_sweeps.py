#!/usr/bin/env python3
"""Joint power control under parameter sweeps: D2D pair distance, pair
count, coherence length, and cellular SINR target."""
import argparse

from d2dmimo import ExperimentSpec, SystemConfig, run_experiment

SWEEPS = {
    "fig6": ("d2d_max_dist", [25.0, 50.0, 100.0, 150.0, 200.0]),
    "fig7": ("n_d2d", [10, 15, 20, 30, 40]),
    "fig8": ("coherence_len", [25, 50, 100, 200]),
    "fig9": ("sinr_target", [0.1, 0.2, 0.372, 0.7, 1.3]),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("experiments", nargs="*", default=list(SWEEPS),
                    choices=list(SWEEPS) + [[]], help="subset to run")
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cfg = SystemConfig(sinr_target=0.372, rng_seed=args.seed)
    for name in (args.experiments or list(SWEEPS)):
        variable, values = SWEEPS[name]
        spec = ExperimentSpec(
            experiment=name, sweep_variable=variable, sweep_values=values,
            trials=args.trials, config=cfg, output=f"{args.outdir}/{name}.csv",
        )
        rows, _ = run_experiment(spec, workers=args.workers)
        print(f"{name}: wrote {spec.output} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
