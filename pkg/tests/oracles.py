"""Independent brute-force reference implementations used by the tests."""

import numpy as np


def upstream_bruteforce(edges):
    """pipe_id -> (count, length) by DFS over reversed edges, one search per pipe."""
    into = {}
    for a, b, pid, length in edges:
        into.setdefault(b, []).append((a, pid, length))
    out = {}
    for a, b, pid, length in edges:
        seen_pipes, seen_nodes, stack = {}, {a}, [a]
        while stack:
            node = stack.pop()
            for src, q, ln in into.get(node, ()):
                if q not in seen_pipes:
                    seen_pipes[q] = ln
                if src not in seen_nodes:
                    seen_nodes.add(src)
                    stack.append(src)
        out[pid] = (len(seen_pipes), float(sum(seen_pipes.values())))
    return out


def random_dag(rng, n_nodes, n_edges):
    """Edges (from, to, pipe_id, length) with a random hidden topological order."""
    labels = [f"m{v}" for v in rng.permutation(n_nodes)]
    edges = []
    for k in range(n_edges):
        i, j = sorted(rng.choice(n_nodes, size=2, replace=False))
        edges.append((labels[i], labels[j], f"e{k}", float(rng.integers(1, 100))))
    return edges


def pairwise_auc(y, s):
    """P(score_pos > score_neg) + 0.5 P(tie), by enumeration of all pairs."""
    pos = [si for yi, si in zip(y, s) if yi == 1]
    neg = [si for yi, si in zip(y, s) if yi == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def naive_violations(p, eps=0.0):
    count = 0
    for t in range(1, len(p)):
        if p[t] < p[t - 1] - eps:
            count += 1
    return count


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def max_relative_error(a, b, floor=1e-8):
    a, b = np.ravel(a), np.ravel(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))
