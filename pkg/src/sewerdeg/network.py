"""Sewer topology and the upstream-count / upstream-length surrogate features."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from sewerdeg.errors import ValidationError


@dataclass(frozen=True)
class Edge:
    from_node: str
    to_node: str
    pipe_id: str
    length: float


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # self_loop | cycle | disconnected | duplicate
    pipe_ids: tuple[str, ...]
    message: str


class SewerGraph:
    """Directed pipe network, edges oriented in flow direction.

    Parallel pipes between the same pair of manholes are allowed.  With
    ``validate=True`` (the default) self-loops, cycles and duplicate pipe ids
    raise :class:`ValidationError`.
    """

    def __init__(self, edges: Iterable[Edge], validate: bool = True):
        self.edges: tuple[Edge, ...] = tuple(edges)
        nodes = []
        seen = set()
        for e in self.edges:
            for n in (e.from_node, e.to_node):
                if n not in seen:
                    seen.add(n)
                    nodes.append(n)
        self.nodes: tuple[str, ...] = tuple(nodes)
        self._index = {e.pipe_id: i for i, e in enumerate(self.edges)}
        if validate:
            problems = [d for d in validate_graph(self) if d.kind != "disconnected"]
            if problems:
                raise ValidationError("; ".join(d.message for d in problems))
        self._table = None

    @classmethod
    def from_tuples(cls, rows: Iterable[tuple], validate: bool = True) -> "SewerGraph":
        return cls((Edge(str(a), str(b), str(p), float(l)) for a, b, p, l in rows), validate=validate)

    def __len__(self):
        return len(self.edges)

    def edge(self, pipe_id: str) -> Edge:
        try:
            return self.edges[self._index[pipe_id]]
        except KeyError:
            raise ValidationError(f"unknown pipe_id {pipe_id!r}") from None

    def topological_nodes(self) -> list[str]:
        """Nodes in flow order (sources first); raises on a cycle."""
        indeg = {n: 0 for n in self.nodes}
        out = defaultdict(list)
        for e in self.edges:
            indeg[e.to_node] += 1
            out[e.from_node].append(e)
        queue = [n for n in self.nodes if indeg[n] == 0]
        order = []
        while queue:
            n = queue.pop()
            order.append(n)
            for e in out[n]:
                indeg[e.to_node] -= 1
                if indeg[e.to_node] == 0:
                    queue.append(e.to_node)
        if len(order) != len(self.nodes):
            edge = _find_cycle_edge(self, {n for n, d in indeg.items() if d > 0})
            raise ValidationError(
                f"cycle detected through pipe {edge.pipe_id} ({edge.from_node} -> {edge.to_node})"
            )
        return order

    def upstream_table(self) -> dict[str, tuple[int, float]]:
        if self._table is None:
            node_stats = node_upstream(self)
            self._table = {e.pipe_id: node_stats[e.from_node] for e in self.edges}
        return self._table


def _find_cycle_edge(graph: SewerGraph, residual: set[str]) -> Edge:
    inbound = defaultdict(list)
    for e in graph.edges:
        if e.from_node in residual and e.to_node in residual:
            inbound[e.to_node].append(e)
    node = min(residual)
    visited = set()
    while node not in visited:
        visited.add(node)
        edge = inbound[node][0]
        node = edge.from_node
    return inbound[node][0]


def node_upstream(graph: SewerGraph) -> dict[str, tuple[int, float]]:
    """(count, total length) of pipes whose flow reaches each node.

    Accumulates in topological order.  When every node drains through at
    most one pipe the network is a forest and sums are exact; otherwise
    upstream pipe sets are carried as bitsets so shared upstream branches are
    counted once.
    """
    order = graph.topological_nodes()
    inbound = defaultdict(list)
    outdeg = defaultdict(int)
    for e in graph.edges:
        inbound[e.to_node].append(e)
        outdeg[e.from_node] += 1

    if all(d <= 1 for d in outdeg.values()):
        count = {}
        length = {}
        for n in order:
            c, l = 0, 0.0
            for e in inbound[n]:
                c += 1 + count[e.from_node]
                l += e.length + length[e.from_node]
            count[n], length[n] = c, l
        return {n: (count[n], length[n]) for n in graph.nodes}

    lengths = np.array([e.length for e in graph.edges], dtype=np.float64)
    nbytes = (len(graph.edges) + 7) // 8
    bits = {}
    stats = {}
    for n in order:
        mask = 0
        for e in inbound[n]:
            mask |= bits[e.from_node] | (1 << graph._index[e.pipe_id])
        bits[n] = mask
        if mask == 0:
            stats[n] = (0, 0.0)
        else:
            flags = np.unpackbits(
                np.frombuffer(mask.to_bytes(nbytes, "little"), dtype=np.uint8), bitorder="little"
            )[: len(lengths)]
            stats[n] = (mask.bit_count(), float(lengths[flags.astype(bool)].sum()))
    return stats


def upstream_stats(graph: SewerGraph, pipe_id: str) -> tuple[int, float]:
    """Count and total length of pipes strictly upstream of ``pipe_id``."""
    graph.edge(pipe_id)
    return graph.upstream_table()[pipe_id]


def validate_graph(graph: SewerGraph) -> list[Diagnostic]:
    diags = []
    ids = defaultdict(int)
    for e in graph.edges:
        ids[e.pipe_id] += 1
    for pid, n in ids.items():
        if n > 1:
            diags.append(Diagnostic("duplicate", (pid,), f"pipe_id {pid} appears {n} times"))

    for e in graph.edges:
        if e.from_node == e.to_node:
            diags.append(Diagnostic("self_loop", (e.pipe_id,), f"self-loop at node {e.from_node} (pipe {e.pipe_id})"))

    proper = [e for e in graph.edges if e.from_node != e.to_node]
    for comp in _strong_components(graph.nodes, proper):
        if len(comp) > 1:
            members = tuple(e.pipe_id for e in proper if e.from_node in comp and e.to_node in comp)
            diags.append(Diagnostic("cycle", members, f"cycle through pipes {', '.join(members)}"))

    if len(graph.edges) > 1:
        degree = defaultdict(int)
        for e in graph.edges:
            degree[e.from_node] += 1
            degree[e.to_node] += 1
        for e in graph.edges:
            if e.from_node != e.to_node and degree[e.from_node] == 1 and degree[e.to_node] == 1:
                diags.append(Diagnostic("disconnected", (e.pipe_id,), f"pipe {e.pipe_id} is not connected to any other pipe"))
    return diags


def _strong_components(nodes: Sequence[str], edges: Sequence[Edge]) -> list[set[str]]:
    """Kosaraju, iterative."""
    succ, pred = defaultdict(list), defaultdict(list)
    for e in edges:
        succ[e.from_node].append(e.to_node)
        pred[e.to_node].append(e.from_node)
    visited, finish = set(), []
    for root in nodes:
        if root in visited:
            continue
        visited.add(root)
        stack = [(root, iter(succ[root]))]
        while stack:
            node, it = stack[-1]
            nxt = next((m for m in it if m not in visited), None)
            if nxt is None:
                stack.pop()
                finish.append(node)
            else:
                visited.add(nxt)
                stack.append((nxt, iter(succ[nxt])))
    comps, assigned = [], set()
    for root in reversed(finish):
        if root in assigned:
            continue
        comp = {root}
        assigned.add(root)
        stack = [root]
        while stack:
            node = stack.pop()
            for m in pred[node]:
                if m not in assigned:
                    assigned.add(m)
                    comp.add(m)
                    stack.append(m)
        comps.append(comp)
    return comps


def graph_from_pipes(pipes, include_house_connections: bool = False, validate: bool = True) -> SewerGraph:
    edges = [
        Edge(p.from_node, p.to_node, p.pipe_id, float(p.length or 0.0))
        for p in pipes
        if p.from_node is not None
        and p.to_node is not None
        and (include_house_connections or not p.is_house_connection)
    ]
    return SewerGraph(edges, validate=validate)


def upstream_for_pipes(pipes, include_house_connections: bool = False) -> dict[str, tuple[int, float]]:
    """Upstream stats for every pipe with topology, including pipes left out of the totals."""
    graph = graph_from_pipes(pipes, include_house_connections)
    node_stats = node_upstream(graph)
    out = {}
    for p in pipes:
        if p.from_node is None or p.to_node is None:
            continue
        out[p.pipe_id] = node_stats.get(p.from_node, (0, 0.0))
    return out
