"""Command-line pipeline: generate -> preprocess -> train/evaluate -> curves -> audit/plan -> report.

Every command writes its outputs plus a ``manifest.json`` entry (flags, seed
and SHA-256 of each artifact) into its output directory.  Exit codes: 0 ok,
2 validation error, 3 numerical failure; errors are printed to stderr as JSON.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import warnings
from pathlib import Path

from sewerdeg import __version__
from sewerdeg.data_model import (
    CleaningConfig,
    Preprocessor,
    clean_dataset,
    latest_per_pipe,
    read_inspections_csv,
    read_pipes_csv,
    read_samples_csv,
    write_features_csv,
    write_inspections_csv,
    write_pipes_csv,
    write_samples_csv,
)
from sewerdeg.errors import MissingArtifactError, NumericalError, ValidationError

log = logging.getLogger("sewerdeg")

MANIFEST = "manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("UsageError", message, 2)
        sys.exit(2)


def _emit_error(kind: str, message: str, code: int) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {v}")
    return v


def _thresholds(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad threshold list {text!r}")
    if not vals or any(not 0.0 < v < 1.0 for v in vals):
        raise argparse.ArgumentTypeError("thresholds must lie in (0, 1)")
    return vals


def _params(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, raw = pair.partition("=")
        if not sep:
            raise ValidationError(f"--param expects key=value, got {pair!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


# --------------------------------------------------------------------------- file helpers


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _require(path: Path, command: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(path, command)
    return path


def _record(out: Path, key: str, args, artifacts) -> None:
    """Merge this command's entry into the directory manifest."""
    mpath = out / MANIFEST
    manifest = {"format": "sewerdeg-manifest", "runs": {}}
    if mpath.exists():
        try:
            manifest = json.loads(mpath.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            log.warning("replacing unreadable manifest %s", mpath)
    config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items() if k != "func"}
    manifest.setdefault("runs", {})[key] = {
        "command": args.command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "artifacts": {p.name: _sha256(p) for p in sorted(artifacts)},
    }
    _write_json(mpath, manifest)


def _out_dir(args) -> Path:
    out = Path(args.out if args.out is not None else args.data)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_samples(data: Path):
    return read_samples_csv(_require(data / "samples.csv", "sewerdeg preprocess"))


def _load_preprocessor(data: Path) -> Preprocessor:
    path = _require(data / "scaling.json", "sewerdeg preprocess")
    return Preprocessor.from_dict(json.loads(path.read_text(encoding="utf-8")))


def _load_model(data: Path, name: str):
    from sewerdeg.models import load_model

    return load_model(_require(data / f"model_{name}.json", f"sewerdeg train --model {name}"))


# --------------------------------------------------------------------------- commands


def cmd_generate(args) -> None:
    from sewerdeg.synthetic import GroundTruth, NetworkConfig, generate_dataset

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gt = GroundTruth(seed=args.seed, kind=args.kind)
    net = NetworkConfig(house_connection_fraction=args.house_connections)
    pipes, inspections, _, gt = generate_dataset(
        args.pipes, args.seed, args.inspections_per_pipe, gt, net, args.incomplete_fraction
    )
    paths = [out / "pipes.csv", out / "inspections.csv", out / "ground_truth.json"]
    write_pipes_csv(paths[0], pipes)
    write_inspections_csv(paths[1], inspections)
    _write_json(paths[2], gt.to_dict())
    _record(out, "generate", args, paths)


def cmd_preprocess(args) -> None:
    pipes = read_pipes_csv(args.pipes)
    inspections = read_inspections_csv(args.inspections)
    cfg = CleaningConfig(min_material_count=args.min_material_count)
    samples, clog = clean_dataset(pipes, inspections, cfg)
    pre = Preprocessor.fit(samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "samples.csv", out / "features.csv", out / "cleaning_log.json", out / "scaling.json"]
    write_samples_csv(paths[0], samples)
    write_features_csv(paths[1], pre.transform(samples), samples)
    _write_json(paths[2], clog.to_dict())
    _write_json(paths[3], pre.to_dict())
    _record(out, "preprocess", args, paths)


def cmd_train(args) -> None:
    from sewerdeg.models import fit_model, make_config, save_model

    data = Path(args.data)
    samples = _load_samples(data)
    pre = _load_preprocessor(data)
    cfg = make_config(args.model, _params(args.param))
    model = fit_model(args.model, pre.transform(samples), None, cfg, seed=args.seed)
    out = _out_dir(args)
    path = out / f"model_{args.model}.json"
    save_model(model, path, cfg)
    _record(out, f"train:{args.model}", args, [path])


def cmd_evaluate(args) -> None:
    from sewerdeg.evaluation import cross_validate, write_metric_table_csv
    from sewerdeg.models import make_config

    data = Path(args.data)
    samples = _load_samples(data)
    cfg = make_config(args.model, _params(args.param))
    report = cross_validate(samples, args.model, cfg, seed=args.seed, n_folds=args.folds)
    out = _out_dir(args)
    paths = [out / f"metrics_{args.model}.json", out / f"metrics_{args.model}.csv"]
    _write_json(paths[0], report.to_dict())
    write_metric_table_csv(paths[1], [report])
    _record(out, f"evaluate:{args.model}", args, paths)


def cmd_curves(args) -> None:
    from sewerdeg.degradation import simulate_curves, write_curves_csv

    data = Path(args.data)
    model = _load_model(data, args.model)
    samples = latest_per_pipe(_load_samples(data))
    curves = simulate_curves(model, samples, _load_preprocessor(data), args.horizon, args.model)
    out = _out_dir(args)
    path = out / f"curves_{args.model}.csv"
    write_curves_csv(path, curves)
    _record(out, f"curves:{args.model}", args, [path])


def _load_curves(data: Path, name: str):
    from sewerdeg.degradation import read_curves_csv

    return read_curves_csv(_require(data / f"curves_{name}.csv", f"sewerdeg curves --model {name}"))


def cmd_audit(args) -> None:
    from sewerdeg.degradation import audit_curves, write_monotonicity_csv

    data = Path(args.data)
    report = audit_curves(_load_curves(data, args.model), args.epsilon, args.model)
    out = _out_dir(args)
    paths = [out / f"monotonicity_{args.model}.json", out / f"monotonicity_{args.model}.csv"]
    d = report.to_dict()
    d["epsilon"] = args.epsilon
    _write_json(paths[0], d)
    write_monotonicity_csv(paths[1], [report])
    _record(out, f"audit:{args.model}", args, paths)


def cmd_plan(args) -> None:
    from sewerdeg.planning import compare_scenarios, static_inspection_age, write_cumulative_csv, write_histogram_csv

    data = Path(args.data)
    curves = _load_curves(data, args.model)
    latest = {s.pipe_id: s for s in latest_per_pipe(_load_samples(data))}
    wanted = {c.pipe_id for c in curves}
    latest = {k: v for k, v in latest.items() if k in wanted}
    if args.actual == "recorded":
        actual = {k: int(s.age) for k, s in latest.items()}
        source = "recorded inspection age"
    else:
        year = args.evaluation_year or max(s.inspection_year for s in latest.values())
        actual = {k: static_inspection_age(s.install_year, year) for k, s in latest.items()}
        source = f"static plan, next inspection at or after {year}"
    reports = compare_scenarios(curves, args.thresholds, actual, source)
    horizon = max(c.horizon for c in curves) if curves else 0
    lengths = {k: s.features["length"] for k, s in latest.items()}
    out = _out_dir(args)
    paths = [
        out / f"scenarios_{args.model}.json",
        out / f"cumulative_{args.model}.csv",
        out / f"lateness_{args.model}.csv",
    ]
    _write_json(paths[0], {"model": args.model, "scenarios": [r.to_dict() for r in reports]})
    write_cumulative_csv(paths[1], reports, horizon, lengths)
    write_histogram_csv(paths[2], reports)
    _record(out, f"plan:{args.model}", args, paths)


def _fmt_pct(v) -> str:
    return "n/a" if v is None else f"{100 * v:.2f}%"


def cmd_report(args) -> None:
    from sewerdeg.models import MODEL_LABELS, MODEL_NAMES

    data = Path(args.data)

    def load(name):
        p = data / name
        return json.loads(p.read_text(encoding="utf-8")) if p.exists() else None

    lines = ["# sewerdeg run report", ""]
    clog = load("cleaning_log.json")
    if clog:
        lines += ["## Cleaning", "", f"{clog['n_raw']} raw inspections, {clog['n_clean']} kept.", ""]
        lines += ["| rule | dropped | % |", "|---|---|---|"]
        lines += [f"| {r} | {clog['dropped'][r]} | {clog['dropped_pct'][r]:.2f} |" for r in clog["rules"]]
        lines.append("")

    rows = [(m, load(f"metrics_{m}.json")) for m in MODEL_NAMES]
    rows = [(m, r) for m, r in rows if r]
    if rows:
        lines += ["## Performance on the held-out set (mean (sd) over folds)", ""]
        lines += ["| model | accuracy % | recall % | precision % | AUC |", "|---|---|---|---|---|"]
        for m, r in rows:
            cells = []
            for key, scale in (("accuracy", 100), ("recall", 100), ("precision", 100), ("auc", 1)):
                mu, sd = r["mean"][key], r["sd"][key]
                cells.append("n/a" if mu is None else f"{mu * scale:.3f} ({(sd or 0) * scale:.3g})")
            lines.append(f"| {MODEL_LABELS[m]} | " + " | ".join(cells) + " |")
        lines.append("")

    mono = [(m, load(f"monotonicity_{m}.json")) for m in MODEL_NAMES]
    mono = [(m, r) for m, r in mono if r]
    if mono:
        lines += ["## Monotonicity of degradation curves (unique pipes)", ""]
        lines += ["| model | count | mean | max |", "|---|---|---|---|"]
        lines += [f"| {MODEL_LABELS[m]} | {r['count']} | {r['mean']:.2f} | {r['max']} |" for m, r in mono]
        lines.append("")

    lr = load("model_lr.json")
    if lr and "inference" in lr:
        inf = lr["inference"]
        lines += ["## Logistic regression inference (scaled inputs)", ""]
        lines += ["| variable | estimate | SE | z | p | OR | OR 95% CI |", "|---|---|---|---|---|---|---|"]
        for c in inf["coefficients"]:
            lines.append(
                f"| {c['variable']} | {c['estimate']:.4g} | {c['std_error']:.4g} | {c['z']:.2f} | "
                f"{c['p']:.3g}{c['significance']} | {c['odds_ratio']:.4g} | "
                f"({c['or_ci_low']:.4g}, {c['or_ci_high']:.4g}) |"
            )
        lines += ["", f"Null deviance {inf['null_deviance']:.2f}, residual deviance {inf['deviance']:.2f}, "
                  f"chi2 {inf['chi2']:.2f} on {inf['chi2_df']} df (p = {inf['chi2_p']:.3g}).", ""]

    for m in MODEL_NAMES:
        sc = load(f"scenarios_{m}.json")
        if not sc:
            continue
        lines += [f"## Inspection scenarios ({MODEL_LABELS[m]})", ""]
        lines += ["| threshold | late | late among due | never due | actual age source |", "|---|---|---|---|---|"]
        for s in sc["scenarios"]:
            lines.append(
                f"| {s['threshold']:g} | {_fmt_pct(s['late_fraction'])} | {_fmt_pct(s['late_fraction_of_due'])} | "
                f"{_fmt_pct(s['never_due_fraction'])} | {s['actual_source']} |"
            )
        lines.append("")

    if len(lines) == 2:
        raise MissingArtifactError(data / "metrics_<model>.json", "sewerdeg evaluate")
    out = _out_dir(args)
    path = out / "report.md"
    path.write_text("\n".join(lines), encoding="utf-8")
    _record(out, "report", args, [path])


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    from sewerdeg.models import MODEL_NAMES

    p = _Parser(prog="sewerdeg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="synthetic pipes/inspections with a known ground truth")
    g.add_argument("--pipes", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--inspections-per-pipe", type=_positive_int, default=1)
    g.add_argument("--kind", choices=("logistic", "step"), default="logistic")
    g.add_argument("--incomplete-fraction", type=_fraction, default=0.0)
    g.add_argument("--house-connections", type=_fraction, default=0.0)
    g.set_defaults(func=cmd_generate)

    pp = sub.add_parser("preprocess", help="clean, join and scale raw CSVs")
    pp.add_argument("--pipes", required=True)
    pp.add_argument("--inspections", required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--min-material-count", type=int, default=5)
    pp.set_defaults(func=cmd_preprocess)

    def staged(name, func, help_, model=True, seed=False):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--data", required=True, help="directory holding earlier artifacts")
        s.add_argument("--out", default=None, help="output directory (default: --data)")
        if model:
            s.add_argument("--model", choices=MODEL_NAMES, default="lr")
        if seed:
            s.add_argument("--seed", type=int, default=0)
        s.set_defaults(func=func)
        return s

    t = staged("train", cmd_train, "fit one model on all cleaned samples", seed=True)
    t.add_argument("--param", action="append", metavar="KEY=VALUE")
    e = staged("evaluate", cmd_evaluate, "hold-out + repeated resplit evaluation", seed=True)
    e.add_argument("--param", action="append", metavar="KEY=VALUE")
    e.add_argument("--folds", type=_positive_int, default=10)
    c = staged("curves", cmd_curves, "simulate degradation curves per unique pipe")
    c.add_argument("--horizon", type=int, default=100)
    a = staged("audit", cmd_audit, "count monotonicity violations")
    a.add_argument("--epsilon", type=float, default=0.0)
    pl = staged("plan", cmd_plan, "compare threshold inspection scenarios")
    pl.add_argument("--thresholds", type=_thresholds, default=(0.3, 0.5, 0.7))
    pl.add_argument("--actual", choices=("recorded", "static"), default="recorded")
    pl.add_argument("--evaluation-year", type=int, default=None)
    staged("report", cmd_report, "collate a Markdown summary", model=False)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            args.func(args)
    except ValidationError as exc:
        _emit_error(type(exc).__name__, str(exc), 2)
        return 2
    except NumericalError as exc:
        _emit_error(type(exc).__name__, str(exc), 3)
        return 3
    except OSError as exc:
        _emit_error("IOError", str(exc), 2)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
