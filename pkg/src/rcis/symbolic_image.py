"""Symbolic images: directed graphs over the cells of a covering.

For one disturbance sample ``w`` the cell ``B_i`` gets an edge to ``B_j``
when some image box of ``B_i`` (sampled points or an interval enclosure,
over all sampled inputs) meets ``B_j`` and ``B_j`` is still a cell of the
covering. Images leaving the root box contribute nothing, so a cell whose
images all miss the retained cells has out-degree zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from rcis.dynamics import (
    SamplerConfig,
    SystemModel,
    cell_input_samples,
    evaluate_batch,
    evaluate_interval_batch,
    sample_cell,
    sample_cells,
    sample_inputs,
)
from rcis.geometry import Box, Covering, inflate

METHODS = ("sampling", "interval")


class Digraph:
    """Compressed adjacency: successors of vertex ``i`` are ``indices[indptr[i]:indptr[i+1]]``."""

    def __init__(self, indptr: np.ndarray, indices: np.ndarray, labels: Optional[Sequence] = None):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self._labels = None if labels is None else list(labels)

    @classmethod
    def from_edges(cls, vertices: Iterable, edges: Iterable) -> "Digraph":
        vertices = list(vertices)
        pos = {v: i for i, v in enumerate(vertices)}
        pairs = sorted({(pos[a], pos[b]) for a, b in edges})
        indptr = np.zeros(len(vertices) + 1, dtype=np.int64)
        for a, _ in pairs:
            indptr[a + 1] += 1
        return cls(np.cumsum(indptr), np.array([b for _, b in pairs], dtype=np.int64), vertices)

    @property
    def size(self) -> int:
        return len(self.indptr) - 1

    @property
    def labels(self) -> list:
        if self._labels is None:
            return list(range(self.size))
        return self._labels

    @property
    def edge_count(self) -> int:
        return int(self.indptr[-1])

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def _index(self, label) -> int:
        if self._labels is None:
            return int(label)
        return self._labels.index(label)

    def successors(self, label) -> list:
        i = self._index(label)
        labels = self.labels
        return [labels[j] for j in self.indices[self.indptr[i]:self.indptr[i + 1]]]

    def out_degree(self, label) -> int:
        i = self._index(label)
        return int(self.indptr[i + 1] - self.indptr[i])

    def edge_array(self) -> np.ndarray:
        src = np.repeat(np.arange(self.size), self.out_degrees())
        return np.stack([src, self.indices], axis=1)

    def edges(self) -> list:
        labels = self.labels
        return [(labels[a], labels[b]) for a, b in self.edge_array()]

    def restricted(self, keep: np.ndarray) -> "Digraph":
        """Same vertex set; edges touching a dropped vertex are removed and dropped vertices lose all edges."""
        keep = np.asarray(keep, dtype=bool)
        e = self.edge_array()
        ok = keep[e[:, 0]] & keep[e[:, 1]]
        return _from_pairs(e[ok, 0], e[ok, 1], self.size, self._labels)


def _from_pairs(src: np.ndarray, dst: np.ndarray, size: int, labels=None, cls=Digraph, **extra):
    indptr = np.zeros(size + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    if cls is Digraph:
        return Digraph(indptr, dst, labels)
    return cls(indptr=indptr, indices=dst, **extra)


class SymbolicImage(Digraph):
    """Symbolic image for one disturbance sample; vertex ``i`` is ``covering.coords[i]``."""

    def __init__(self, covering: Covering, w: np.ndarray, indptr, indices, perturbation=None):
        super().__init__(indptr, indices)
        self.covering = covering
        self.w = np.asarray(w, dtype=float)
        self.perturbation = None if perturbation is None else np.asarray(perturbation, dtype=float)

    @property
    def labels(self) -> list:
        return [tuple(int(v) for v in row) for row in self.covering.coords]

    def _index(self, label) -> int:
        pos = self.covering.position_of_keys(self.covering.linear_index(np.asarray(label)))[0]
        if pos < 0:
            raise KeyError(f"{label} is not a cell of the covering")
        return int(pos)

    def restricted(self, keep: np.ndarray) -> "SymbolicImage":
        keep = np.asarray(keep, dtype=bool)
        e = self.edge_array()
        ok = keep[e[:, 0]] & keep[e[:, 1]]
        return _from_pairs(
            e[ok, 0], e[ok, 1], self.size, cls=SymbolicImage,
            covering=self.covering, w=self.w, perturbation=self.perturbation,
        )

    def edge_lines(self) -> list:
        coords = self.covering.coords
        fmt = lambda c: ",".join(str(int(v)) for v in c)  # noqa: E731
        return [f"{fmt(coords[a])} -> {fmt(coords[b])}" for a, b in self.edge_array()]


def write_edge_list(g: SymbolicImage, path) -> None:
    """Debug dump: one ``src_coords -> dst_coords`` line per edge."""
    with open(path, "w") as fh:
        w = ",".join(repr(float(v)) for v in g.w)
        fh.write(f"# w = {w}\n")
        for line in g.edge_lines():
            fh.write(line + "\n")


# image computation -------------------------------------------------------------

def image_of_cell(
    model: SystemModel,
    b: Box,
    w,
    cfg: SamplerConfig,
    method: str = "sampling",
    key: Optional[Sequence[int]] = None,
) -> list:
    """Image boxes of one cell for a fixed disturbance, inflated by ``model.image_inflation``."""
    w = np.asarray(w, dtype=float).reshape(-1)
    lo, hi, _ = _raw_images(model, np.asarray(b.lo)[None], np.asarray(b.hi)[None], w, cfg, method,
                            keys=None if key is None else [list(key)])
    eps = model.image_inflation
    return [inflate(Box(a, c), eps) for a, c in zip(lo, hi)]


def _raw_images(model, cell_lo, cell_hi, w, cfg, method, keys=None) -> tuple:
    """Uninflated image boxes for a batch of cells: ``(lo, hi, src)``."""
    N, n = cell_lo.shape
    inputs, valid = cell_input_samples(model, cell_lo, cell_hi, cfg)
    K = inputs.shape[1]
    if method == "sampling":
        if cfg.cell_strategy == "random" and keys is None:
            pts = np.stack([sample_cell(Box(a, c), cfg) for a, c in zip(cell_lo, cell_hi)])
        else:
            pts = sample_cells(cell_lo, cell_hi, cfg, keys)
        S = pts.shape[1]
        x = np.repeat(pts.reshape(N * S, n), K, axis=0)
        u = np.repeat(inputs, S, axis=0).reshape(N * S * K, model.m)
        src = np.repeat(np.arange(N), S * K)
        keep = valid[src]
        y = evaluate_batch(model, x[keep], u[keep], w) if keep.any() else np.zeros((0, n))
        return y, y, src[keep]
    if method == "interval":
        lo = np.repeat(cell_lo, K, axis=0)
        hi = np.repeat(cell_hi, K, axis=0)
        u = inputs.reshape(N * K, model.m)
        src = np.repeat(np.arange(N), K)
        keep = valid[src]
        if not keep.any():
            return np.zeros((0, n)), np.zeros((0, n)), src[keep]
        ylo, yhi = evaluate_interval_batch(model, lo[keep], hi[keep], u[keep], u[keep], w)
        return ylo, yhi, src[keep]
    raise ValueError(f"unknown image method {method!r}; choose from {METHODS}")


def _hit_cells(covering: Covering, src: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> tuple:
    """All ``(src, dst_position)`` pairs with box ``[lo, hi]`` meeting a retained cell."""
    root = covering.root
    rlo, rhi = np.asarray(root.lo), np.asarray(root.hi)
    meets_root = np.all((hi >= rlo) & (lo <= rhi), axis=1)
    points = hi is lo
    src, lo = src[meets_root], lo[meets_root]
    hi = lo if points else hi[meets_root]
    if len(src) == 0:
        return src, src
    a, _ = covering.locate(np.maximum(lo, rlo))
    if points:
        pos = covering.position_of_keys(covering.linear_index(a))
        hit = pos >= 0
        return src[hit], pos[hit]
    b, _ = covering.locate(np.minimum(hi, rhi))
    span = b - a + 1
    if np.all(span == 1):
        keys = covering.linear_index(a)
        pos = covering.position_of_keys(keys)
        hit = pos >= 0
        return src[hit], pos[hit]
    out_src, out_dst = [], []
    total = np.prod(span, axis=1)
    small = total <= 64
    if small.any():
        s_src, s_a, s_span = src[small], a[small], span[small]
        max_span = s_span.max(axis=0)
        offsets = np.stack(np.meshgrid(*[np.arange(k) for k in max_span], indexing="ij"), -1).reshape(-1, covering.n)
        for off in offsets:
            ok = np.all(off < s_span, axis=1)
            if not ok.any():
                continue
            pos = covering.position_of_keys(covering.linear_index(s_a[ok] + off))
            hit = pos >= 0
            out_src.append(s_src[ok][hit])
            out_dst.append(pos[hit])
    for i in np.flatnonzero(~small):
        grid = np.stack(np.meshgrid(*[np.arange(a[i, d], b[i, d] + 1) for d in range(covering.n)], indexing="ij"), -1)
        pos = covering.position_of_keys(covering.linear_index(grid.reshape(-1, covering.n)))
        pos = pos[pos >= 0]
        out_src.append(np.full(len(pos), src[i]))
        out_dst.append(pos)
    if not out_src:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(out_src), np.concatenate(out_dst)


def _assemble(covering: Covering, w, src, dst, perturbation=None) -> SymbolicImage:
    N = len(covering)
    keys = np.unique(src.astype(np.int64) * N + dst.astype(np.int64))
    s = keys // N
    d = keys % N
    return _from_pairs(s, d, N, cls=SymbolicImage, covering=covering, w=w, perturbation=perturbation)


def _cell_keys(covering: Covering, cfg: SamplerConfig):
    if cfg.cell_strategy != "random":
        return None
    return [[covering.depth, *row] for row in covering.coords.tolist()]


def build_symbolic_image(
    model: SystemModel,
    covering: Covering,
    w,
    cfg: SamplerConfig,
    method: str = "sampling",
    perturbation=None,
) -> SymbolicImage:
    """Symbolic image of ``f(., U, w)`` over ``covering``.

    Without ``perturbation`` the image boxes are inflated by
    ``model.image_inflation`` and an edge is added for every cell they meet.
    With a ``perturbation`` vector the uninflated images are translated by it
    instead, giving the graph for that one realisation of the perturbation.
    """
    return build_symbolic_images(model, covering, w, cfg, method, [perturbation])[0]


def build_symbolic_images(
    model: SystemModel,
    covering: Covering,
    w,
    cfg: SamplerConfig,
    method: str = "sampling",
    perturbations: Sequence = (None,),
) -> list:
    """Graphs for one disturbance and several perturbations, sharing one evaluation of the images."""
    if covering.is_empty:
        raise ValueError("cannot build a symbolic image over an empty covering")
    w = np.asarray(w, dtype=float).reshape(-1)
    cell_lo, cell_hi = covering.bounds()
    lo, hi, src = _raw_images(model, cell_lo, cell_hi, w, cfg, method, keys=_cell_keys(covering, cfg))
    graphs = []
    for e in perturbations:
        if e is None:
            eps = model.image_inflation
            blo, bhi = (lo - eps, hi + eps) if eps else (lo, hi)
        else:
            e = np.asarray(e, dtype=float).reshape(-1)
            blo = lo + e
            bhi = blo if hi is lo else hi + e
        s, d = _hit_cells(covering, src, blo, bhi)
        graphs.append(_assemble(covering, w, s, d, e))
    return graphs


def default_input_samples(model: SystemModel, cfg: SamplerConfig) -> np.ndarray:
    return sample_inputs(model.U, cfg)
