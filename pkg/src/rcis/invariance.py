"""Forward-invariant vertex sets of symbolic images.

A vertex carries an infinite admissible path exactly when it lies on a
cycle or can reach one. Cycles live in recurrent strongly connected
components (two or more vertices, or a single vertex with a self-loop), so
``I+(G)`` is the union of the recurrent components together with every
vertex that has a directed path into them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rcis.symbolic_image import Digraph


@dataclass(frozen=True)
class Component:
    vertices: tuple
    recurrent: bool


def scc_labels(g: Digraph) -> tuple:
    """Iterative Tarjan.

    Returns ``(comp, recurrent)``: ``comp[v]`` is the component number of
    vertex ``v`` (numbered in the order Tarjan completes them, i.e. reverse
    topological order) and ``recurrent[c]`` flags component ``c``.
    """
    n = g.size
    indptr = g.indptr.tolist()
    indices = g.indices.tolist()
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list = []
    recurrent: list = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        # frames: (vertex, next edge position)
        work = [(root, indptr[root])]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            end = indptr[v + 1]
            descended = False
            while pos < end:
                u = indices[pos]
                pos += 1
                if index[u] == -1:
                    work[-1] = (v, pos)
                    index[u] = low[u] = counter
                    counter += 1
                    stack.append(u)
                    on_stack[u] = True
                    work.append((u, indptr[u]))
                    descended = True
                    break
                if on_stack[u] and index[u] < low[v]:
                    low[v] = index[u]
            if descended:
                continue
            work.pop()
            if low[v] == index[v]:
                c = len(recurrent)
                size = 0
                while True:
                    u = stack.pop()
                    on_stack[u] = False
                    comp[u] = c
                    size += 1
                    if u == v:
                        break
                loop = size == 1 and v in indices[indptr[v]:indptr[v + 1]]
                recurrent.append(size >= 2 or loop)
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
    return np.array(comp, dtype=np.int64), np.array(recurrent, dtype=bool)


def strongly_connected_components(g: Digraph) -> list:
    comp, recurrent = scc_labels(g)
    labels = g.labels
    groups: dict = {}
    for v, c in enumerate(comp.tolist()):
        groups.setdefault(c, []).append(labels[v])
    return [Component(tuple(groups[c]), bool(recurrent[c])) for c in range(len(recurrent))]


def _reverse(g: Digraph) -> tuple:
    e = g.edge_array()
    order = np.argsort(e[:, 1], kind="stable")
    src = e[order, 0]
    counts = np.bincount(e[:, 1], minlength=g.size)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return indptr, src


def can_reach(g: Digraph, targets: np.ndarray) -> np.ndarray:
    """Mask of vertices with a directed path (length >= 0) into ``targets``."""
    rptr, rsrc = _reverse(g)
    reached = np.asarray(targets, dtype=bool).copy()
    frontier = np.flatnonzero(reached)
    while frontier.size:
        starts, stops = rptr[frontier], rptr[frontier + 1]
        lengths = stops - starts
        if lengths.sum() == 0:
            break
        offs = np.repeat(stops - lengths.cumsum(), lengths) + np.arange(lengths.sum())
        pred = np.unique(rsrc[offs])
        frontier = pred[~reached[pred]]
        reached[frontier] = True
    return reached


@dataclass(frozen=True, eq=False)
class InvariantVertexSet:
    graph: Digraph
    member_mask: np.ndarray
    recurrent_mask: np.ndarray

    def _select(self, mask) -> frozenset:
        labels = self.graph.labels
        return frozenset(labels[i] for i in np.flatnonzero(mask))

    @property
    def members(self) -> frozenset:
        return self._select(self.member_mask)

    @property
    def recurrent(self) -> frozenset:
        return self._select(self.recurrent_mask)

    @property
    def feeder(self) -> frozenset:
        return self._select(self.member_mask & ~self.recurrent_mask)

    def __len__(self) -> int:
        return int(self.member_mask.sum())


def forward_invariant_vertices(g: Digraph) -> InvariantVertexSet:
    comp, recurrent = scc_labels(g)
    rec = recurrent[comp] if g.size else np.zeros(0, dtype=bool)
    return InvariantVertexSet(g, can_reach(g, rec), rec)


def robust_select_mask(graphs: Sequence[Digraph], refine: bool = False) -> np.ndarray:
    """Intersection of the member masks; with ``refine`` the graphs are re-restricted until stable."""
    if len(graphs) == 0:
        raise ValueError("robust_select needs at least one graph")
    size = graphs[0].size
    if any(g.size != size for g in graphs):
        raise ValueError("graphs do not share one vertex set")
    keep = np.ones(size, dtype=bool)
    current = list(graphs)
    while True:
        new = keep.copy()
        for g in current:
            new &= forward_invariant_vertices(g).member_mask
            if not new.any():
                return new
        if not refine or np.array_equal(new, keep):
            return new
        keep = new
        current = [g.restricted(keep) for g in graphs]


def robust_select(graphs: Sequence[Digraph], refine: bool = False) -> frozenset:
    mask = robust_select_mask(graphs, refine)
    labels = graphs[0].labels
    return frozenset(labels[i] for i in np.flatnonzero(mask))
