"""Second-order gradient boosting of regression trees on the logistic loss."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from sewerdeg.errors import ValidationError
from sewerdeg.models.base import Classifier, as_xy, check_binary, sigmoid
from sewerdeg.models.tree import TreeArrays, _Builder, _threshold

_TIE = 1e-12


@dataclass(frozen=True)
class BoostConfig:
    rounds: int = 100
    eta: float = 0.3
    max_depth: int = 6
    lam: float = 1.0
    min_child_weight: float = 1.0
    gamma: float = 0.0


def logistic_loss(y, margin) -> float:
    """Mean negative log-likelihood for labels in {0, 1} and raw scores."""
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def leaf_weight(G: float, H: float, lam: float) -> float:
    return -G / (H + lam)


def split_gain(GL, HL, GR, HR, lam):
    """Loss reduction of a split; vectorised over candidate cut points."""
    G, H = GL + GR, HL + HR
    return 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - G**2 / (H + lam))


def best_gain_split(x, g, h, lam, min_child_weight):
    order = np.argsort(x, kind="stable")
    xs, gs, hs = x[order], g[order], h[order]
    GL = np.cumsum(gs)[:-1]
    HL = np.cumsum(hs)[:-1]
    G, H = GL[-1] + gs[-1], HL[-1] + hs[-1]
    GR, HR = G - GL, H - HL
    valid = (xs[:-1] < xs[1:]) & (HL >= min_child_weight) & (HR >= min_child_weight)
    if not valid.any():
        return None
    gain = np.where(valid, split_gain(GL, HL, GR, HR, lam), -np.inf)
    best = gain.max()
    i = int(np.nonzero(gain >= best - _TIE)[0][0])
    return float(gain[i]), _threshold(xs[i], xs[i + 1])


def grow_boost_tree(X, g, h, cfg: BoostConfig):
    """Exact greedy tree whose leaves carry ``-G / (H + lambda)``."""
    n, d = X.shape
    importance = np.zeros(d)
    b = _Builder()
    root = b.add(leaf_weight(g.sum(), h.sum(), cfg.lam), n)
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= cfg.max_depth or len(idx) < 2:
            continue
        best = None
        for f in range(d):
            res = best_gain_split(X[idx, f], g[idx], h[idx], cfg.lam, cfg.min_child_weight)
            if res is not None and (best is None or res[0] > best[0] + _TIE):
                best = (res[0], f, res[1])
        if best is None or best[0] - cfg.gamma <= 0:
            continue
        gain, f, thr = best
        importance[f] += gain
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        left = b.add(leaf_weight(g[li].sum(), h[li].sum(), cfg.lam), len(li))
        right = b.add(leaf_weight(g[ri].sum(), h[ri].sum(), cfg.lam), len(ri))
        b.feature[node], b.threshold[node] = f, thr
        b.left[node], b.right[node] = left, right
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.arrays(), importance


@dataclass(frozen=True)
class BoostedModel(Classifier):
    """``margin(x) = base_score + eta * sum_r tree_r(x)``; leaves store unshrunk weights."""

    name = "xgb"
    columns: tuple[str, ...]
    base_score: float
    eta: float
    trees: tuple[TreeArrays, ...]
    importance: np.ndarray
    loss_trace: tuple[float, ...] = field(default=())
    seed: int | None = None

    @property
    def rounds(self) -> int:
        return len(self.trees)

    def margin(self, X, rounds: int | None = None) -> np.ndarray:
        X = self._check(X)
        out = np.full(X.shape[0], self.base_score)
        for t in self.trees[: self.rounds if rounds is None else rounds]:
            out += self.eta * t.predict(X)
        return out

    def truncate(self, rounds: int) -> "BoostedModel":
        return replace(self, trees=self.trees[:rounds], loss_trace=self.loss_trace[: rounds + 1])

    def _proba(self, X):
        return sigmoid(self.margin(X))

    def to_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "eta": self.eta,
            "trees": [t.to_dict() for t in self.trees],
            "importance": self.importance.tolist(),
            "loss_trace": list(self.loss_trace),
        }

    @classmethod
    def from_dict(cls, columns, params, seed=None):
        return cls(
            tuple(columns),
            float(params["base_score"]),
            float(params["eta"]),
            tuple(TreeArrays.from_dict(t) for t in params["trees"]),
            np.asarray(params["importance"]),
            tuple(params.get("loss_trace", ())),
            seed,
        )


def boost_fit(X, y=None, config: BoostConfig = BoostConfig(), columns=None, seed=None) -> BoostedModel:
    """Newton boosting: gradients ``p - y`` and hessians ``p (1 - p)`` per round.

    ``loss_trace[r]`` is the training loss after ``r`` rounds (entry 0 is the
    base score alone).
    """
    X, y, cols = as_xy(X, y)
    y = check_binary(y)
    if config.rounds < 1:
        raise ValidationError("rounds must be >= 1")
    if not 0 < config.eta <= 1 or config.lam < 0:
        raise ValidationError("need 0 < eta <= 1 and lambda >= 0")
    rate = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
    base = float(np.log(rate / (1 - rate)))
    margin = np.full(len(y), base)
    trees, trace = [], [logistic_loss(y, margin)]
    importance = np.zeros(X.shape[1])
    for _ in range(config.rounds):
        p = sigmoid(margin)
        g, h = p - y, p * (1 - p)
        tree, imp = grow_boost_tree(X, g, h, config)
        trees.append(tree)
        importance += imp
        margin = margin + config.eta * tree.predict(X)
        trace.append(logistic_loss(y, margin))
    return BoostedModel(tuple(columns or cols), base, config.eta, tuple(trees), importance, tuple(trace), seed)
