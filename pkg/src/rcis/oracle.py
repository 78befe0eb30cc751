"""Brute-force reference computations that avoid the engine's graph code.

``grid_discriminating_kernel`` runs the textbook viability iteration on a
uniform grid using only cell centres; ``simulate_exit_time`` rolls single
trajectories forward. Both locate points with their own floor arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from rcis.dynamics import SamplerConfig, SystemModel, cell_input_samples, evaluate_batch, sample_disturbances
from rcis.geometry import Box, Covering

POLICIES = ("worst_u", "best_u_per_w")


@dataclass(frozen=True, eq=False)
class GridKernel:
    X: Box
    resolution: tuple
    members: np.ndarray  # bool, shape == resolution, axis i <-> x_{i+1}
    iterations: int

    @property
    def cell_widths(self) -> np.ndarray:
        return self.X.widths / np.array(self.resolution, dtype=float)

    @property
    def volume(self) -> float:
        return float(self.members.sum() * np.prod(self.cell_widths))

    @property
    def is_empty(self) -> bool:
        return not self.members.any()

    def centers(self) -> np.ndarray:
        axes = [
            np.asarray(self.X.lo[i]) + (np.arange(r) + 0.5) * self.cell_widths[i]
            for i, r in enumerate(self.resolution)
        ]
        return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(self.resolution))

    def grid_index(self, points: np.ndarray) -> np.ndarray:
        """Flat grid index of each point, -1 outside ``X``."""
        return _grid_index(np.atleast_2d(points), self.X, self.resolution)

    def contains(self, points: np.ndarray) -> np.ndarray:
        idx = self.grid_index(points)
        flat = self.members.reshape(-1)
        return np.where(idx >= 0, flat[np.maximum(idx, 0)], False)

    def depth(self) -> np.ndarray:
        """Distance (in grid steps) from each cell to the nearest non-member or the outside of ``X``."""
        padded = np.pad(self.members, 1, constant_values=False)
        d = ndimage.distance_transform_edt(padded)
        return d[tuple(slice(1, -1) for _ in self.resolution)]


def _grid_index(points: np.ndarray, X: Box, resolution: Sequence[int]) -> np.ndarray:
    lo = np.asarray(X.lo)
    hi = np.asarray(X.hi)
    res = np.asarray(resolution)
    inside = np.all((points >= lo) & (points <= hi), axis=1)
    k = np.floor((points - lo) / (hi - lo) * res).astype(np.int64)
    k = np.clip(k, 0, res - 1)
    flat = np.ravel_multi_index(tuple(k.T), tuple(res))
    return np.where(inside, flat, -1)


def grid_discriminating_kernel(
    model: SystemModel,
    resolution: Union[int, Sequence[int]],
    samplers: Optional[SamplerConfig] = None,
    max_iterations: int = 100000,
) -> GridKernel:
    """Iterate ``Q <- {x in Q : for all w there is u with f(x, u, w) in Q}`` over grid-cell centres."""
    cfg = samplers or SamplerConfig()
    n = model.n
    if n > 3:
        raise ValueError("the grid oracle supports dimensions up to 3")
    res = (int(resolution),) * n if np.isscalar(resolution) else tuple(int(r) for r in resolution)
    if len(res) != n or min(res) < 2:
        raise ValueError("resolution must be >= 2 in every dimension")
    shell = GridKernel(model.X, res, np.ones(res, dtype=bool), 0)
    c = shell.centers()
    G = len(c)
    inputs, valid = cell_input_samples(model, c, c, cfg)
    K = inputs.shape[1]
    ws = sample_disturbances(model.W, cfg)
    succ = np.full((G, len(ws), K), -1, dtype=np.int64)
    for j, w in enumerate(ws):
        for q in range(K):
            y = evaluate_batch(model, c, inputs[:, q], w)
            succ[:, j, q] = _grid_index(y, model.X, res)
    succ[~valid] = -1
    Q = np.ones(G, dtype=bool)
    it = 0
    while it < max_iterations:
        ok = np.where(succ >= 0, Q[np.maximum(succ, 0)], False)
        nxt = Q & ok.any(axis=2).all(axis=1)
        it += 1
        if np.array_equal(nxt, Q):
            break
        Q = nxt
    return GridKernel(model.X, res, Q.reshape(res), it)


def _margin(X: Box, y: np.ndarray) -> np.ndarray:
    lo, hi = np.asarray(X.lo), np.asarray(X.hi)
    return np.minimum(y - lo, hi - y).min(axis=1)


def simulate_exit_time(
    model: SystemModel,
    x0,
    policy: str = "best_u_per_w",
    horizon: int = 1000,
    samplers: Optional[SamplerConfig] = None,
    kernel: Optional[GridKernel] = None,
):
    """Step index at which the state first leaves ``X``, or ``"survived"``.

    Disturbances act adversarially over the sampled set. ``best_u_per_w``
    answers every sampled ``w`` with the input that scores best;
    ``worst_u`` plays the input that scores worst. The score is the depth
    inside ``kernel`` when one is given, otherwise the margin to the boundary of ``X``.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    cfg = samplers or SamplerConfig()
    x = np.asarray(x0, dtype=float).reshape(1, -1)
    if not model.X.contains_point(x[0]):
        raise ValueError("x0 must lie in X")
    ws = sample_disturbances(model.W, cfg)
    depth = None if kernel is None else kernel.depth().reshape(-1)

    def score(y):
        m = _margin(model.X, y)
        if depth is None:
            return m
        idx = kernel.grid_index(y)
        d = np.where(idx >= 0, depth[np.maximum(idx, 0)], 0.0)
        # break ties between equally deep cells by the margin to X
        return np.where(m >= 0, d + 1e-6 * m, m)

    for step in range(1, horizon + 1):
        inputs, valid = cell_input_samples(model, x, x, cfg)
        us = inputs[0] if valid[0] else np.zeros((1, model.m))
        best_per_w = []
        for w in ws:
            y = evaluate_batch(model, np.repeat(x, len(us), axis=0), us, w)
            s = score(y)
            q = int(np.argmax(s)) if policy == "best_u_per_w" else int(np.argmin(s))
            best_per_w.append((float(s[q]), y[q]))
        # the disturbance picks the realisation that is worst for the chosen response
        _, y = min(best_per_w, key=lambda t: t[0])
        if not model.X.contains_point(y):
            return step
        x = y.reshape(1, -1)
    return "survived"


def membership_on_lattice(covering: Covering, points: np.ndarray) -> np.ndarray:
    """Covering membership computed from cell bounds, independent of ``Covering.locate``."""
    if covering.is_empty:
        return np.zeros(len(points), dtype=bool)
    lo = np.asarray(covering.root.lo)
    w = covering.cell_widths
    k = np.floor((points - lo) / w).astype(np.int64)
    k = np.clip(k, 0, np.array(covering.shape) - 1)
    own = np.ravel_multi_index(tuple(covering.coords.T), covering.shape)
    inside = np.all((points >= lo) & (points <= np.asarray(covering.root.hi)), axis=1)
    return inside & np.isin(np.ravel_multi_index(tuple(k.T), covering.shape), own)


def symmetric_difference_volume(covering: Covering, kernel: GridKernel, per_dim: int = 1000) -> float:
    """Volume of the symmetric difference, estimated on a midpoint lattice over ``X``."""
    X = kernel.X
    axes = [X.lo[i] + (np.arange(per_dim) + 0.5) * (X.hi[i] - X.lo[i]) / per_dim for i in range(X.n)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, X.n)
    a = membership_on_lattice(covering, pts)
    b = kernel.contains(pts)
    return float(np.count_nonzero(a ^ b)) / len(pts) * X.volume


def to_pgm(kernel: GridKernel) -> str:
    """Plain grey map (P2); x1 runs left to right, x2 bottom to top."""
    if kernel.members.ndim > 2:
        raise ValueError("grey-map export needs a 1-D or 2-D kernel")
    grid = kernel.members if kernel.members.ndim == 2 else kernel.members[:, None]
    rows = grid.T[::-1].astype(int) * 255
    width, height = grid.shape
    lines = ["P2", f"{width} {height}", "255"]
    lines += [" ".join(str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"
