"""Compare all six classifiers on one synthetic dataset.

Prints held-out metrics (mean and SD over resplits), monotonicity violations
of the age sweep, and the threshold scenarios built from the LR curves.

    python3 scripts/model_comparison.py --pipes 2000 --kind step --seed 0
"""

import argparse
import warnings

from sewerdeg.data_model import Preprocessor, clean_dataset, latest_per_pipe
from sewerdeg.degradation import audit_curves, simulate_curves
from sewerdeg.evaluation import METRICS, cross_validate
from sewerdeg.models import MODEL_NAMES, fit_model
from sewerdeg.planning import DEFAULT_THRESHOLDS, compare_scenarios
from sewerdeg.synthetic import GroundTruth, generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pipes", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--kind", choices=("logistic", "step"), default="step")
    ap.add_argument("--folds", type=int, default=10)
    ap.add_argument("--models", default=",".join(MODEL_NAMES))
    ap.add_argument("--horizon", type=int, default=100)
    args = ap.parse_args()

    pipes, insp, _, _ = generate_dataset(args.pipes, args.seed, 1, GroundTruth(seed=args.seed, kind=args.kind))
    samples, log = clean_dataset(pipes, insp)
    print(f"{len(samples)} samples after cleaning ({log.n_raw - log.n_clean} removed)")
    pre = Preprocessor.fit(samples)
    fm = pre.transform(samples)
    latest = latest_per_pipe(samples)

    print(f"\n{'model':<6}" + "".join(f"{m:>20}" for m in METRICS) + f"{'violations':>12}")
    lr_curves = None
    for name in args.models.split(","):
        rep = cross_validate(samples, name, seed=args.seed, n_folds=args.folds)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit_model(name, fm, seed=args.seed)
        curves = simulate_curves(model, latest, pre, args.horizon, name)
        audit = audit_curves(curves, model=name)
        row = rep.table_row()
        print(f"{name:<6}" + "".join(f"{row[m]:>20}" for m in METRICS) + f"{audit.total:>12}")
        if name == "lr":
            lr_curves = curves

    if lr_curves is not None:
        actual = {s.pipe_id: int(s.age) for s in latest}
        print("\nthreshold  due  late  late fraction")
        for r in compare_scenarios(lr_curves, DEFAULT_THRESHOLDS, actual):
            print(f"{r.threshold:>9g}{r.n_due:>5}{r.n_late:>6}{100 * r.late_fraction:>14.2f}%")


if __name__ == "__main__":
    main()
