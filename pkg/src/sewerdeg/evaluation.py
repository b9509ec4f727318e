"""Classification metrics and the hold-out + repeated-resplit evaluation protocol."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from sewerdeg._parallel import pmap
from sewerdeg.data_model import LabeledSample, Preprocessor, fit_encoding, fit_scaling
from sewerdeg.errors import NumericalError, ValidationError
from sewerdeg.rng import Stream, mix64

log = logging.getLogger(__name__)

METRICS = ("accuracy", "recall", "precision", "auc")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _as_vectors(y_true, y_score):
    y_true = np.asarray(y_true)
    y_score = np.asarray(y_score, dtype=np.float64)
    if y_true.shape != y_score.shape or y_true.ndim != 1:
        raise ValidationError("y_true and y_score must be 1-D and of equal length")
    if y_true.size == 0:
        raise ValidationError("empty input")
    if not np.all((y_true == 0) | (y_true == 1)):
        raise ValidationError("labels must be 0/1")
    return y_true.astype(np.int64), y_score


def confusion(y_true, y_score, threshold: float = 0.5) -> ConfusionCounts:
    """Counts with a positive prediction iff ``score >= threshold``."""
    y, s = _as_vectors(y_true, y_score)
    if np.any((s < 0) | (s > 1)):
        raise ValidationError("scores must lie in [0, 1]")
    pred = s >= threshold
    pos = y == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float | None  # None when TP + FP = 0
    recall: float | None  # None when TP + FN = 0


def metrics(counts: ConfusionCounts) -> Metrics:
    if counts.n == 0:
        raise ValidationError("no evaluated samples")
    acc = (counts.tp + counts.tn) / counts.n
    prec = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else None
    rec = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else None
    return Metrics(acc, prec, rec)


def roc_curve(y_true, y_score):
    """(fpr, tpr) at every distinct threshold, starting from (0, 0)."""
    y, s = _as_vectors(y_true, y_score)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("ROC needs at least one positive and one negative")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    return np.r_[0.0, fps / n_neg], np.r_[0.0, tps / n_pos]


def auc(y_true, y_score) -> float:
    """Trapezoidal area under the ROC curve (tied scores contribute 1/2 per pair)."""
    fpr, tpr = roc_curve(y_true, y_score)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


# --------------------------------------------------------------------------- splits


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def holdout_split(groups: Sequence[str], fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Group-preserving split into ``(pool, test)`` index arrays.

    Groups are visited in random order and added to the test side while they
    fit under the target size ``round(fraction * n)``.
    """
    groups = list(groups)
    n = len(groups)
    target = round_half_up(fraction * n)
    members: dict[str, list[int]] = {}
    for i, g in enumerate(groups):
        members.setdefault(g, []).append(i)
    keys = list(members)
    order = Stream(seed, "holdout").permutation(len(keys))
    test, size = [], 0
    for k in order:
        grp = members[keys[k]]
        if size + len(grp) <= target:
            test.extend(grp)
            size += len(grp)
            if size == target:
                break
    is_test = np.zeros(n, dtype=bool)
    is_test[test] = True
    return np.nonzero(~is_test)[0], np.nonzero(is_test)[0]


def _allocate(total: int, sizes: Sequence[int]) -> list[int]:
    """Largest-remainder apportionment of ``total`` proportional to ``sizes``."""
    n = sum(sizes)
    quotas = [total * s / n for s in sizes]
    base = [math.floor(q) for q in quotas]
    rest = total - sum(base)
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:rest]:
        base[i] += 1
    return base


def fold_splits(labels, n_folds: int, val_fraction: float, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified random ``(train, val)`` resplits of ``range(len(labels))``."""
    labels = np.asarray(labels)
    n = len(labels)
    n_val = round_half_up(val_fraction * n)
    classes = sorted(set(labels.tolist()))
    by_class = [np.nonzero(labels == c)[0] for c in classes]
    quota = _allocate(n_val, [len(ix) for ix in by_class])
    out = []
    for k in range(n_folds):
        val = []
        for c, ix, q in zip(classes, by_class, quota):
            perm = Stream(seed, "fold", k, "class", int(c)).permutation(len(ix))
            val.extend(ix[perm[:q]].tolist())
        is_val = np.zeros(n, dtype=bool)
        is_val[val] = True
        out.append((np.nonzero(~is_val)[0], np.nonzero(is_val)[0]))
    return out


# --------------------------------------------------------------------------- protocol


@dataclass
class MetricReport:
    model: str
    seed: int
    per_fold: dict
    n_test: int
    n_pool: int
    n_train: int
    n_val: int
    skipped_folds: list = field(default_factory=list)

    def mean(self, metric: str) -> float | None:
        vals = [v for v in self.per_fold[metric] if v is not None]
        return float(np.mean(vals)) if vals else None

    def sd(self, metric: str) -> float | None:
        vals = [v for v in self.per_fold[metric] if v is not None]
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "seed": self.seed,
            "per_fold": self.per_fold,
            "mean": {m: self.mean(m) for m in METRICS},
            "sd": {m: self.sd(m) for m in METRICS},
            "sd_over": "folds (sample SD, ddof=1)",
            "evaluated_on": "held-out test set",
            "split_sizes": {"test": self.n_test, "pool": self.n_pool, "train": self.n_train, "validation": self.n_val},
            "skipped_folds": self.skipped_folds,
        }

    def table_row(self) -> dict:
        """Summary cells: percentages for the rates, a fraction for AUC."""
        row = {"model": self.model}
        for m in METRICS:
            mu, sd = self.mean(m), self.sd(m)
            scale = 1.0 if m == "auc" else 100.0
            if mu is None:
                row[m] = "n/a"
            else:
                row[m] = f"{mu * scale:.3f} ({(sd or 0.0) * scale:.3g})"
        return row


def _fold_seed(seed: int, k: int) -> int:
    return mix64(mix64(seed) ^ (k + 1)) & 0x7FFFFFFF


def cross_validate(
    samples: Sequence[LabeledSample],
    model_name: str,
    model_config=None,
    seed: int = 0,
    n_folds: int = 10,
    test_fraction: float = 0.1,
    val_fraction: float = 0.3,
    threshold: float = 0.5,
) -> MetricReport:
    """Fixed grouped hold-out, then ``n_folds`` stratified train/validation resplits.

    Each fold refits the scaling on its training part, trains, and is scored
    on the held-out test set.  Categorical levels are taken from the whole
    dataset so every partition shares one column schema.
    """
    from sewerdeg.models import fit_model, make_config

    cfg = model_config if model_config is not None else make_config(model_name)
    samples = list(samples)
    pool_idx, test_idx = holdout_split([s.pipe_id for s in samples], test_fraction, seed)
    if len(test_idx) == 0 or len(pool_idx) == 0:
        raise ValidationError("dataset too small for the hold-out split")
    encoding = fit_encoding(samples)
    test = [samples[i] for i in test_idx]
    pool = [samples[i] for i in pool_idx]
    y_pool = np.array([s.label for s in pool])
    folds = fold_splits(y_pool, n_folds, val_fraction, seed)
    if any(len(tr) == 0 or len(va) == 0 for tr, va in folds):
        raise ValidationError("dataset too small for the train/validation resplit")

    def run(k):
        tr, _ = folds[k]
        train = [pool[i] for i in tr]
        y_tr = y_pool[tr]
        if y_tr.min() == y_tr.max():
            return k, None, "single-class training labels"
        pre = Preprocessor(fit_scaling(train), encoding)
        fm = pre.transform(train)
        try:
            model = fit_model(model_name, fm, None, cfg, seed=_fold_seed(seed, k))
        except NumericalError as exc:
            return k, None, str(exc)
        te = pre.transform(test)
        score = model.predict_proba(te)
        m = metrics(confusion(te.y, score, threshold))
        try:
            a = auc(te.y, score)
        except ValidationError:
            a = None
        return k, {"accuracy": m.accuracy, "recall": m.recall, "precision": m.precision, "auc": a}, None

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = pmap(run, range(n_folds))
    per_fold = {m: [] for m in METRICS}
    skipped = []
    for k, res, reason in results:
        if res is None:
            log.warning("fold %d skipped: %s", k, reason)
            warnings.warn(f"fold {k} skipped: {reason}", RuntimeWarning, stacklevel=2)
            skipped.append({"fold": k, "reason": reason})
            continue
        for m in METRICS:
            per_fold[m].append(res[m])
    return MetricReport(
        model=model_name,
        seed=seed,
        per_fold=per_fold,
        n_test=len(test_idx),
        n_pool=len(pool_idx),
        n_train=len(folds[0][0]),
        n_val=len(folds[0][1]),
        skipped_folds=skipped,
    )


def write_metric_table_csv(path, reports: Sequence[MetricReport]) -> None:
    """One row per model with "mean (sd)" cells."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("model", "accuracy", "recall", "precision", "auc"))
        for r in reports:
            row = r.table_row()
            w.writerow((row["model"], row["accuracy"], row["recall"], row["precision"], row["auc"]))
