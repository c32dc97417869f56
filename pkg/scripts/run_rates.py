"""Run a rate ladder and print per-n medians with the three rate fits.

Example: python3 scripts/run_rates.py --dimension 2 --replications 5
"""
import argparse
import sys

from curstat.rates import RATE_MODELS, BenchConfig, fit_rate, run_ladder


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--dimension", type=int, default=1)
    p.add_argument("--ladder", help="comma separated sample sizes (default: built-in ladder)")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--csv", help="also write the rate table here")
    args = p.parse_args(argv)

    overrides = {"seed": args.seed}
    if args.ladder:
        overrides["ladder"] = tuple(int(x) for x in args.ladder.split(","))
    if args.replications:
        overrides["replications"] = args.replications
    cfg = BenchConfig.defaults(args.dimension, **overrides)

    def progress(rec):
        print(f"  n={rec.n:5d} rep={rec.rep:3d} h={rec.hellinger:.5f} l2={rec.l2:.5f}", file=sys.stderr)

    table = run_ladder(cfg, progress=progress)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(table.to_csv())
    print("n, median hellinger, median l2")
    med_h, med_l = table.medians("hellinger"), table.medians("l2")
    for n in table.ns():
        print(f"{n:6d}  {med_h[n]:.5f}  {med_l[n]:.5f}")
    if len(table.ns()) >= 3:
        for model in RATE_MODELS:
            fit = fit_rate(table, model, cfg.d)
            print(f"{model:12s} slope={fit.slope:+.4f} log_power={fit.log_power:.4g} C={fit.constant:.4g} rss={fit.rss:.4g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
