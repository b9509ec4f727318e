"""Wald-interval coverage of LR coefficients on data drawn from a known law.

    python3 scripts/coverage_experiment.py --datasets 200 --pipes 5000 --seed 0
"""

import argparse
import json

from sewerdeg.experiments import coverage_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--datasets", type=int, default=200)
    ap.add_argument("--pipes", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--json", help="optional output path")
    args = ap.parse_args()

    res = coverage_experiment(args.datasets, args.pipes, args.seed, args.alpha)
    print(f"{'coefficient':<28}{'true':>10}{'coverage':>10}")
    for name, truth in zip(res.columns, res.truth):
        print(f"{name:<28}{truth:>10.3f}{res.coverage[name]:>10.3f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"truth": dict(zip(res.columns, res.truth.tolist())), "coverage": res.coverage}, fh, indent=2)


if __name__ == "__main__":
    main()
