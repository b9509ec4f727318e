import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sewerdeg.errors import ValidationError
from sewerdeg.evaluation import (
    ConfusionCounts,
    auc,
    confusion,
    cross_validate,
    fold_splits,
    holdout_split,
    metrics,
    round_half_up,
)

from oracles import pairwise_auc


def test_confusion_examples():
    assert confusion([1, 0], [0.9, 0.1], 0.5) == ConfusionCounts(1, 1, 0, 0)
    c = confusion([1, 0, 1, 0], [0.2, 0.3, 0.0, 1.0], 0.0)
    assert c.tn == 0 and c.fn == 0


def test_confusion_errors():
    with pytest.raises(ValidationError):
        confusion([], [])
    with pytest.raises(ValidationError):
        confusion([1], [1.5])


@given(st.lists(st.tuples(st.integers(0, 1), st.floats(0, 1)), min_size=1, max_size=100), st.floats(0, 1))
def test_confusion_matches_loop(rows, tau):
    y = [r[0] for r in rows]
    s = [r[1] for r in rows]
    c = confusion(y, s, tau)
    tp = sum(1 for a, b in rows if a == 1 and b >= tau)
    fp = sum(1 for a, b in rows if a == 0 and b >= tau)
    assert (c.tp, c.fp, c.fn, c.tn) == (tp, fp, sum(y) - tp, len(y) - sum(y) - fp)


def test_metrics_arithmetic():
    m = metrics(ConfusionCounts(tp=3, tn=2, fp=1, fn=1))
    assert m.accuracy == 5 / 7 and m.precision == 0.75 and m.recall == 0.75
    assert metrics(ConfusionCounts(4, 4, 0, 0)) == (metrics(ConfusionCounts(4, 4, 0, 0)))
    assert metrics(ConfusionCounts(0, 5, 0, 2)).precision is None
    assert metrics(ConfusionCounts(0, 5, 1, 0)).recall is None


def test_auc_examples():
    assert auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert auc([0, 1, 0, 1], [0.5] * 4) == 0.5
    with pytest.raises(ValidationError):
        auc([1, 1], [0.2, 0.3])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 8)), min_size=2, max_size=60))
@settings(max_examples=150)
def test_auc_matches_pairwise(rows):
    y = [r[0] for r in rows]
    if len(set(y)) < 2:
        return
    s = [r[1] / 8 for r in rows]
    assert abs(auc(y, s) - pairwise_auc(y, s)) < 1e-12


def test_auc_monotone_transform_invariant():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 200)
    s = rng.uniform(size=200)
    assert auc(y, s) == pytest.approx(auc(y, s**3), abs=1e-15)


def test_round_half_up():
    assert [round_half_up(x) for x in (627.9, 1695.3, 0.5, 2.5)] == [628, 1695, 1, 3]


def test_full_scale_split_sizes():
    groups = [f"p{i % 4899}" for i in range(6279)]
    pool, test = holdout_split(groups, 0.1, 0)
    assert (len(test), len(pool)) == (628, 5651)
    assert not {groups[i] for i in test} & {groups[i] for i in pool}
    labels = np.random.default_rng(0).integers(0, 2, len(pool))
    for tr, va in fold_splits(labels, 10, 0.3, 0):
        assert (len(tr), len(va)) == (3956, 1695)
        assert not set(tr) & set(va) and len(set(tr) | set(va)) == len(pool)


def test_folds_stratified_and_distinct():
    labels = np.array([1] * 300 + [0] * 200)
    folds = fold_splits(labels, 5, 0.3, 4)
    for _, va in folds:
        assert labels[va].sum() == 90
    assert len({tuple(va) for _, va in folds}) == 5


def test_fold_assignment_deterministic():
    labels = np.arange(100) % 2
    a = fold_splits(labels, 3, 0.3, 1)
    b = fold_splits(labels, 3, 0.3, 1)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))


def test_cross_validate_report(small_dataset):
    _, samples, _, _ = small_dataset
    r = cross_validate(samples, "lr", seed=2, n_folds=4)
    assert r.n_test == round_half_up(0.1 * len(samples))
    assert len(r.per_fold["accuracy"]) == 4
    vals = np.array(r.per_fold["auc"])
    assert r.mean("auc") == pytest.approx(vals.mean())
    assert r.sd("auc") == pytest.approx(np.sqrt(((vals - vals.mean()) ** 2).sum() / 3))
    assert r.to_dict()["sd_over"].startswith("folds")
    again = cross_validate(samples, "lr", seed=2, n_folds=4)
    assert again.to_dict() == r.to_dict()


def test_single_class_fold_skipped(small_dataset):
    _, samples, _, _ = small_dataset
    from dataclasses import replace

    ones = [replace(s, label=1) for s in samples]
    ones[0] = replace(ones[0], label=0)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        r = cross_validate(ones, "lr", seed=0, n_folds=2)
    # the lone negative lands in train or validation; when absent from train the fold is skipped
    assert len(r.skipped_folds) + len(r.per_fold["accuracy"]) == 2
    assert len(r.skipped_folds) == sum("skipped" in str(x.message) for x in w)
