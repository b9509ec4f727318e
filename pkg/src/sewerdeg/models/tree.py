"""CART classification trees (Gini) and bootstrap random forests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sewerdeg._parallel import pmap
from sewerdeg.errors import ValidationError
from sewerdeg.models.base import Classifier, as_xy, check_binary
from sewerdeg.rng import Stream

_TIE = 1e-12


def gini(pos: float, n: float) -> float:
    """Binary Gini impurity ``1 - p^2 - (1-p)^2`` for ``pos`` positives out of ``n``."""
    if n == 0:
        return 0.0
    p = pos / n
    return 2.0 * p * (1.0 - p)


@dataclass
class TreeArrays:
    """Flat tree; ``feature == -1`` marks a leaf.  Samples go left when ``x <= threshold``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "TreeArrays":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
            n_samples=np.asarray(d["n_samples"], dtype=np.int64),
        )


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value, self.n = [], [], [], [], [], []

    def add(self, value, n) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.n.append(int(n))
        return len(self.feature) - 1

    def arrays(self) -> TreeArrays:
        return TreeArrays(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=np.float64),
            np.asarray(self.n, dtype=np.int64),
        )


def _threshold(lo: float, hi: float) -> float:
    t = 0.5 * (lo + hi)
    return lo if t >= hi else t


def best_gini_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest weighted child Gini over all cut points of one feature.

    Returns ``(weighted_gini, threshold)`` or ``None`` when no cut leaves
    ``min_leaf`` samples on both sides.  Among equal scores the lowest
    threshold wins.
    """
    n = len(y)
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n_left = np.arange(1, n)
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    pos_left = np.cumsum(ys)[:-1]
    pos_total = pos_left[-1] + ys[-1]
    n_right = n - n_left
    p_l = pos_left / n_left
    p_r = (pos_total - pos_left) / n_right
    w = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / n
    w = np.where(valid, w, np.inf)
    best = w.min()
    i = int(np.nonzero(w <= best + _TIE)[0][0])
    return float(w[i]), _threshold(xs[i], xs[i + 1])


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int | None = None
    min_leaf: int = 1


def grow_tree(X, y, config: TreeConfig, mtry: int | None = None, stream: Stream | None = None):
    """Greedy Gini tree.  Returns ``(TreeArrays, impurity_decrease_per_feature)``.

    With ``mtry`` set, each node scans a random subset of that many features
    (continuing down the random order if none of them admits a valid split).
    """
    n_total, d = X.shape
    importance = np.zeros(d)
    b = _Builder()
    root = b.add(y.mean(), n_total)
    stack = [(root, np.arange(n_total), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        n = len(idx)
        pos = ys.sum()
        if pos == 0 or pos == n or n < 2 * config.min_leaf:
            continue
        if config.max_depth is not None and depth >= config.max_depth:
            continue
        if mtry is None or mtry >= d:
            candidates, extra = list(range(d)), []
        else:
            perm = stream.permutation(d)
            candidates, extra = sorted(perm[:mtry].tolist()), perm[mtry:].tolist()
        best = None
        for f in candidates:
            res = best_gini_split(X[idx, f], ys, config.min_leaf)
            if res is not None and (best is None or res[0] < best[0] - _TIE):
                best = (res[0], f, res[1])
        while best is None and extra:
            f = extra.pop(0)
            res = best_gini_split(X[idx, f], ys, config.min_leaf)
            if res is not None:
                best = (res[0], f, res[1])
        if best is None:
            continue
        w, f, thr = best
        importance[f] += n / n_total * (gini(pos, n) - w)
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        left = b.add(y[li].mean(), len(li))
        right = b.add(y[ri].mean(), len(ri))
        b.feature[node], b.threshold[node] = f, thr
        b.left[node], b.right[node] = left, right
        # right pushed first so the left subtree is numbered first
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.arrays(), importance


@dataclass(frozen=True)
class TreeModel(Classifier):
    name = "dt"
    columns: tuple[str, ...]
    tree: TreeArrays
    importance: np.ndarray
    seed: int | None = None

    def _proba(self, X):
        return self.tree.predict(X)

    def to_dict(self) -> dict:
        return {"tree": self.tree.to_dict(), "importance": self.importance.tolist()}

    @classmethod
    def from_dict(cls, columns, params, seed=None):
        return cls(tuple(columns), TreeArrays.from_dict(params["tree"]), np.asarray(params["importance"]), seed)


def tree_fit(X, y=None, config: TreeConfig = TreeConfig(), columns=None, seed=None) -> TreeModel:
    X, y, cols = as_xy(X, y)
    y = check_binary(y)
    if len(y) < 2 * config.min_leaf:
        raise ValidationError(f"need at least {2 * config.min_leaf} samples for min_leaf={config.min_leaf}")
    tree, imp = grow_tree(X, y, config)
    return TreeModel(tuple(columns or cols), tree, imp, seed)


# --------------------------------------------------------------------------- forest


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    mtry: int | None = None  # default ceil(sqrt(d))
    bootstrap: bool = True
    max_depth: int | None = None
    min_leaf: int = 1


@dataclass(frozen=True)
class ForestModel(Classifier):
    name = "rf"
    columns: tuple[str, ...]
    trees: tuple[TreeArrays, ...]
    importance: np.ndarray
    seed: int | None = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def tree_probas(self, X) -> np.ndarray:
        X = self._check(X)
        return np.stack([t.predict(X) for t in self.trees])

    def _proba(self, X):
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def to_dict(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees], "importance": self.importance.tolist()}

    @classmethod
    def from_dict(cls, columns, params, seed=None):
        return cls(
            tuple(columns),
            tuple(TreeArrays.from_dict(t) for t in params["trees"]),
            np.asarray(params["importance"]),
            seed,
        )


def forest_fit(X, y=None, config: ForestConfig = ForestConfig(), seed: int = 0, columns=None) -> ForestModel:
    """Tree ``t`` draws its bootstrap and feature subsets from ``Stream(seed, "forest", t)``."""
    X, y, cols = as_xy(X, y)
    y = check_binary(y)
    if config.n_trees < 1:
        raise ValidationError("n_trees must be >= 1")
    n, d = X.shape
    mtry = config.mtry if config.mtry is not None else math.ceil(math.sqrt(d))
    tcfg = TreeConfig(config.max_depth, config.min_leaf)

    def one(t):
        stream = Stream(seed, "forest", t)
        idx = stream.spawn("bootstrap").integers(n, n) if config.bootstrap else np.arange(n)
        return grow_tree(X[idx], y[idx], tcfg, mtry=mtry, stream=stream.spawn("features"))

    grown = pmap(one, range(config.n_trees))
    trees = tuple(g[0] for g in grown)
    importance = np.mean([g[1] for g in grown], axis=0)
    return ForestModel(tuple(columns or cols), trees, importance, seed)
