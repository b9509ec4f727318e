import numpy as np
import pytest

from sewerdeg.errors import ValidationError
from sewerdeg.models.base import sigmoid
from sewerdeg.models.boosting import BoostConfig, boost_fit, leaf_weight, logistic_loss, split_gain


def test_base_score_is_log_odds():
    X = np.arange(10.0)[:, None]
    y = np.array([0, 1] * 5, dtype=float)
    m = boost_fit(X, y, BoostConfig(rounds=1))
    assert m.base_score == 0.0
    y2 = np.array([1] * 8 + [0] * 2, dtype=float)
    assert boost_fit(X, y2, BoostConfig(rounds=1)).base_score == pytest.approx(np.log(4))


def test_rounds_zero_rejected():
    with pytest.raises(ValidationError):
        boost_fit(np.ones((4, 1)), np.array([0, 1, 0, 1]), BoostConfig(rounds=0))


def test_split_gain_formula():
    assert split_gain(2.0, 1.0, -3.0, 2.0, 1.0) == pytest.approx(0.5 * (4 / 2 + 9 / 3 - 1 / 4))
    assert leaf_weight(3.0, 2.0, 1.0) == -1.0


def recompute_leaf_weights(model, X, y, lam):
    """Independent pass: rebuild G, H per leaf from the margins before each round."""
    worst = 0.0
    for r, tree in enumerate(model.trees):
        p = sigmoid(model.margin(X, r))
        g, h = p - y, p * (1 - p)
        leaf = tree.apply(X)
        for node in np.unique(leaf):
            sel = leaf == node
            w = -g[sel].sum() / (h[sel].sum() + lam)
            worst = max(worst, abs(w - tree.value[node]))
    return worst


def test_leaf_weights_and_loss_trace(small_matrix):
    _, fm = small_matrix
    cfg = BoostConfig(rounds=15, eta=0.3, lam=1.0, max_depth=3)
    m = boost_fit(fm, config=cfg)
    assert recompute_leaf_weights(m, fm.X, fm.y.astype(float), 1.0) < 1e-10
    trace = np.array(m.loss_trace)
    assert np.all(np.diff(trace) <= 1e-12)
    assert trace[-1] == pytest.approx(logistic_loss(fm.y, m.margin(fm)))


def test_prefix_property(small_matrix):
    _, fm = small_matrix
    long = boost_fit(fm, config=BoostConfig(rounds=8, max_depth=3))
    short = boost_fit(fm, config=BoostConfig(rounds=3, max_depth=3))
    assert np.array_equal(long.truncate(3).margin(fm), short.margin(fm))
    assert long.truncate(3).loss_trace == short.loss_trace


def test_importance_nonnegative(small_matrix):
    _, fm = small_matrix
    m = boost_fit(fm, config=BoostConfig(rounds=5, max_depth=2))
    assert np.all(m.importance >= 0)
