"""Subdivision drivers for outer and inner approximations, plus a one-step validator.

Both drivers share one loop: subdivide the retained cells along the next
cycled dimension, build one symbolic image per disturbance sample, keep the
cells that lie in ``I+`` of every graph, then test for termination.

Inner mode adds an ``eps``-ball to the dynamics. By default the ball is
treated like an extra disturbance: each graph is built for one pair
``(w, e)`` where ``e`` runs over the origin and the corners of the ball, so
the selection has to survive every such offset. Setting
``eps_mode="inflation"`` instead inflates every image box by ``eps`` in a
single graph per ``w``.
"""

from __future__ import annotations

import itertools
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from rcis.dynamics import (
    SamplerConfig,
    SystemModel,
    cell_input_samples,
    evaluate_batch,
    sample_cells,
    sample_disturbances,
    sample_inputs,
)
from rcis.geometry import (
    Box,
    Covering,
    covered_by_arrays,
    coverings_equal_as_sets,
    make_root_covering,
    subdivide,
)
from rcis.invariance import robust_select_mask
from rcis.symbolic_image import METHODS, build_symbolic_images

MODES = ("outer", "inner")
EPS_MODES = ("perturbation", "inflation")
TERMINATIONS = ("empty", "fixed_point", "inclusion_met", "budget_exhausted")
DEFAULT_INNER_CAP = 64


@dataclass(frozen=True)
class RunConfig:
    mode: str = "outer"
    N: Optional[int] = 16
    eps: float = 0.001
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    method: str = "sampling"
    refine_level: bool = False
    eps_mode: str = "perturbation"
    inner_cap: int = DEFAULT_INNER_CAP

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.eps_mode not in EPS_MODES:
            raise ValueError(f"eps_mode must be one of {EPS_MODES}, got {self.eps_mode!r}")
        if self.N is None:
            if self.mode == "outer":
                raise ValueError("outer mode needs an iteration limit N")
        elif int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N!r}")
        if self.mode == "inner" and not (np.isfinite(self.eps) and self.eps > 0):
            raise ValueError("inner mode requires eps > 0")
        if self.inner_cap < 1:
            raise ValueError("inner_cap must be >= 1")

    @property
    def iteration_limit(self) -> int:
        if self.mode == "outer":
            return int(self.N)
        return int(self.N) if self.N is not None else self.inner_cap


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cells: int
    candidates: int
    diameter: float
    graphs: int
    edges: int
    select_seconds: float
    wall_seconds: float

    def as_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "cells": self.cells,
            "candidates": self.candidates,
            "diameter": self.diameter,
            "graphs": self.graphs,
            "edges": self.edges,
            "select_seconds": self.select_seconds,
            "wall_seconds": self.wall_seconds,
        }


@dataclass
class RunReport:
    config: RunConfig
    model_name: str
    records: list
    termination: str
    covering: Covering
    coverings: list
    disturbance_samples: int
    input_samples: int
    perturbations: int

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def graphs_per_iteration(self) -> int:
        return self.disturbance_samples * self.perturbations

    def summary(self) -> dict:
        cfg = self.config
        return {
            "model": self.model_name,
            "mode": cfg.mode,
            "N": cfg.N,
            "eps": cfg.eps,
            "eps_mode": cfg.eps_mode,
            "method": cfg.method,
            "refine_level": cfg.refine_level,
            "sampler": {
                "cell_strategy": cfg.sampler.cell_strategy,
                "cell_samples": cfg.sampler.cell_samples,
                "input_samples": cfg.sampler.input_samples,
                "disturbance_mode": cfg.sampler.disturbance_mode,
                "disturbance_samples_per_dim": cfg.sampler.disturbance_samples_per_dim,
                "rng_seed": cfg.sampler.rng_seed,
            },
            "termination": self.termination,
            "iterations": self.iterations,
            "depth": self.covering.depth,
            "cells": len(self.covering),
            "volume": self.covering.volume,
            "disturbance_samples": self.disturbance_samples,
            "input_samples": self.input_samples,
            "graphs_per_iteration": self.graphs_per_iteration,
            "records": [r.as_dict() for r in self.records],
        }


def _thread_count() -> int:
    raw = os.environ.get("RCIS_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, min(n, 32))


def perturbation_offsets(n: int, eps: float) -> list:
    """The origin followed by the ``2^n`` corners of the ``eps``-ball, in a fixed order."""
    corners = [np.array(c, dtype=float) * eps for c in itertools.product((-1.0, 1.0), repeat=n)]
    return [np.zeros(n)] + corners


def _graph_plan(model: SystemModel, cfg: RunConfig) -> tuple:
    """Model to build graphs with, and the perturbation list per disturbance."""
    if cfg.mode == "outer":
        return model.with_inflation(0.0) if model.image_inflation else model, [None]
    if cfg.eps_mode == "inflation":
        return model.with_inflation(cfg.eps), [None]
    return model.with_inflation(0.0), perturbation_offsets(model.n, cfg.eps)


def _build_graphs(model, covering, ws, cfg: RunConfig, perturbations, pool) -> list:
    def task(w):
        return build_symbolic_images(model, covering, w, cfg.sampler, cfg.method, perturbations)

    if pool is None or len(ws) == 1:
        batches = [task(w) for w in ws]
    else:
        batches = list(pool.map(task, ws))
    return [g for batch in batches for g in batch]


def _rejected_covered(previous: Covering, retained: Covering, rejected: Covering, eps: float) -> bool:
    """Every rejected child lies in the union of retained cells inflated by ``eps``."""
    if rejected.is_empty:
        return True
    if retained.is_empty:
        return False
    rlo, rhi = retained.bounds()
    rlo, rhi = rlo - eps, rhi + eps
    xlo, xhi = rejected.bounds()
    for lo, hi in zip(xlo, xhi):
        near = np.all((rhi >= lo) & (rlo <= hi), axis=1)
        if not near.any() or not covered_by_arrays(lo, hi, rlo[near], rhi[near], 1e-12):
            return False
    return True


def _closed(model: SystemModel, cov: Covering, cfg: RunConfig, eps: float) -> bool:
    # an unchanged union only ends the run once the sampled one-step condition holds on it
    return one_step_invariance_check(model, cov, cov, cfg.sampler, eps, max_witnesses=0).passed


def _run(model: SystemModel, cfg: RunConfig, progress: Optional[Callable] = None) -> RunReport:
    start = time.perf_counter()
    graph_model, perturbations = _graph_plan(model, cfg)
    ws = sample_disturbances(model.W, cfg.sampler)
    n_inputs = len(sample_inputs(model.U, cfg.sampler))
    cov = make_root_covering(model.X)
    coverings = [cov]
    records: list = []
    termination = "budget_exhausted"
    threads = _thread_count()
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 and len(ws) > 1 else None
    try:
        for k in range(1, cfg.iteration_limit + 1):
            child = subdivide(cov)
            graphs = _build_graphs(graph_model, child, ws, cfg, perturbations, pool)
            t0 = time.perf_counter()
            keep = robust_select_mask(graphs, cfg.refine_level)
            t1 = time.perf_counter()
            new = child.subset(keep)
            rec = IterationRecord(
                iteration=k,
                cells=len(new),
                candidates=len(child),
                diameter=child.diameter,
                graphs=len(graphs),
                edges=int(sum(g.edge_count for g in graphs)),
                select_seconds=t1 - t0,
                wall_seconds=t1 - start,
            )
            records.append(rec)
            coverings.append(new)
            if progress is not None:
                progress(rec)
            previous, cov = cov, new
            # these are the checks at the top of iteration k + 1
            if cov.is_empty:
                termination = "empty"
                break
            if cfg.mode == "outer":
                if coverings_equal_as_sets(previous, cov) and _closed(model, cov, cfg, 0.0):
                    termination = "fixed_point"
                    break
            elif _rejected_covered(previous, cov, child.subset(~keep), cfg.eps) and _closed(
                model, cov, cfg, cfg.eps
            ):
                termination = "inclusion_met"
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return RunReport(
        config=cfg,
        model_name=model.name,
        records=records,
        termination=termination,
        covering=cov,
        coverings=coverings,
        disturbance_samples=len(ws),
        input_samples=n_inputs,
        perturbations=len(perturbations),
    )


def run_outer(model: SystemModel, cfg: RunConfig, progress: Optional[Callable] = None) -> RunReport:
    if cfg.mode != "outer":
        raise ValueError("run_outer needs a config with mode='outer'")
    return _run(model, cfg, progress)


def run_inner(model: SystemModel, cfg: RunConfig, progress: Optional[Callable] = None) -> RunReport:
    if cfg.mode != "inner":
        raise ValueError("run_inner needs a config with mode='inner'")
    return _run(model, cfg, progress)


def run(model: SystemModel, cfg: RunConfig, progress: Optional[Callable] = None) -> RunReport:
    return _run(model, cfg, progress)


# one-step validation -------------------------------------------------------------

@dataclass
class InvarianceCheck:
    pass_fraction: float
    checked: int
    failed: int
    empty: bool
    witnesses: list

    @property
    def passed(self) -> bool:
        return self.failed == 0


def boxes_inside(covering: Covering, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Mask of boxes ``[lo, hi]`` contained in the union of the covering's cells."""
    root = covering.root
    rlo, rhi = np.asarray(root.lo), np.asarray(root.hi)
    ok = np.all((lo >= rlo) & (hi <= rhi), axis=1)
    if covering.is_empty:
        return np.zeros(len(lo), dtype=bool)
    a, _ = covering.locate(np.clip(lo, rlo, rhi))
    b, _ = covering.locate(np.clip(hi, rlo, rhi))
    # an upper corner sitting exactly on a lower cell face does not enter that cell
    clo, _ = covering.bounds(b)
    b = np.where((hi <= clo) & (b > a), b - 1, b)
    span = np.where(ok[:, None], b - a + 1, 1)
    for off in itertools.product(*[range(int(s)) for s in span.max(axis=0)]):
        off = np.array(off)
        act = ok & np.all(off < span, axis=1)
        if not act.any():
            continue
        pos = covering.position_of_keys(covering.linear_index(a[act] + off))
        idx = np.flatnonzero(act)
        ok[idx[pos < 0]] = False
    # a lower corner on a cell face may be covered from the neighbouring layer instead
    alo, _ = covering.bounds(a)
    retry = np.flatnonzero(~ok & np.all((lo >= rlo) & (hi <= rhi), axis=1) & np.any((lo == alo) & (a > 0), axis=1))
    if len(retry):
        clo, chi = covering.bounds()
        for i in retry:
            near = np.all((chi >= lo[i]) & (clo <= hi[i]), axis=1)
            ok[i] = bool(near.any()) and covered_by_arrays(lo[i], hi[i], clo[near], chi[near], 1e-12)
    return ok


def one_step_invariance_check(
    model: SystemModel,
    cells,
    covering: Covering,
    cfg: SamplerConfig,
    eps: float = 0.0,
    max_witnesses: int = 10,
) -> InvarianceCheck:
    """For every sampled state and sampled disturbance, look for a sampled input keeping ``f + eps B`` inside."""
    target = _as_covering(cells, covering)
    if target.is_empty:
        return InvarianceCheck(1.0, 0, 0, True, [])
    lo, hi = target.bounds()
    keys = None
    if cfg.cell_strategy == "random":
        keys = [[target.depth, *row] for row in target.coords.tolist()]
    xs = sample_cells(lo, hi, cfg, keys)
    N, S, n = xs.shape
    inputs, valid = cell_input_samples(model, lo, hi, cfg)
    K = inputs.shape[1]
    ws = sample_disturbances(model.W, cfg)
    pts = xs.reshape(N * S, n)
    cell_of = np.repeat(np.arange(N), S)
    good = np.zeros((N * S, len(ws)), dtype=bool)
    for j, w in enumerate(ws):
        for q in range(K):
            todo = ~good[:, j] & valid[cell_of]
            if not todo.any():
                break
            u = inputs[cell_of[todo], q]
            y = evaluate_batch(model, pts[todo], u, w)
            inside = boxes_inside(target, y - eps, y + eps)
            idx = np.flatnonzero(todo)
            good[idx[inside], j] = True
    total = good.size
    failed = int(total - good.sum())
    witnesses = []
    for i, j in zip(*np.nonzero(~good)):
        if len(witnesses) >= max_witnesses:
            break
        witnesses.append({
            "cell": tuple(int(c) for c in target.coords[cell_of[i]]),
            "x": [float(v) for v in pts[i]],
            "w": [float(v) for v in ws[j]],
        })
    return InvarianceCheck(1.0 - failed / total, total, failed, False, witnesses)


def _as_covering(cells, covering: Covering) -> Covering:
    if isinstance(cells, Covering):
        return cells
    coords = np.array(sorted(cells), dtype=np.int64).reshape(-1, covering.n)
    return covering.with_coords(coords)
