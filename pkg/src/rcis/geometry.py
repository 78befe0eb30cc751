"""Boxes, dyadic coverings and the exact set tests built on them.

A covering never stores floating cell bounds. Every cell is an integer
coordinate vector together with the covering's per-dimension split counts;
bounds are derived on demand from the root box. Cells are half-open
``[lo, hi)`` except on the upper faces of the root, which are closed, so
every point of the root lies in exactly one cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

CellId = tuple


@dataclass(frozen=True)
class Box:
    """Axis-aligned closed box ``[lo, hi]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.ravel(self.lo))
        hi = tuple(float(v) for v in np.ravel(self.hi))
        if len(lo) == 0 or len(lo) != len(hi):
            raise ValueError(f"box bounds must be non-empty and of equal length, got {len(lo)} and {len(hi)}")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError(f"box bound {i} is not finite: [{a}, {b}]")
            if a > b:
                raise ValueError(f"box bound {i} has lo > hi: [{a}, {b}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, radius: float, n: int) -> "Box":
        """The infinity-norm ball ``{x : |x|_inf <= radius}`` in ``n`` dimensions."""
        return cls((-radius,) * n, (radius,) * n)

    @classmethod
    def point(cls, x: Sequence[float]) -> "Box":
        return cls(tuple(x), tuple(x))

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains_point(self, x: Sequence[float]) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def contains_box(self, other: "Box") -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def intersects(self, other: "Box") -> bool:
        return all(c <= b and a <= d for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def vertices(self) -> np.ndarray:
        """Distinct corner points; zero-width dimensions contribute one value."""
        axes = [np.unique([a, b]) for a, b in zip(self.lo, self.hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)


def inflate(b: Box, eps: float) -> Box:
    """Minkowski sum of ``b`` with the infinity-norm ball of radius ``eps``."""
    if eps < 0:
        raise ValueError(f"inflation radius must be non-negative, got {eps}")
    return Box(tuple(v - eps for v in b.lo), tuple(v + eps for v in b.hi))


@dataclass(frozen=True, eq=False)
class Covering:
    """A set of cells of the dyadic grid over ``root``.

    ``coords`` is an ``(N, n)`` integer array, unique and sorted by linear
    index. Dimension ``i`` has been bisected ``splits[i]`` times, so it
    holds ``2**splits[i]`` grid columns.
    """

    root: Box
    depth: int
    splits: tuple
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        splits = tuple(int(s) for s in self.splits)
        if len(splits) != self.root.n:
            raise ValueError("splits must have one entry per dimension")
        if sum(splits) != self.depth:
            raise ValueError(f"sum of splits {sum(splits)} does not match depth {self.depth}")
        if sum(splits) > 62:
            raise ValueError("coverings deeper than 62 bisections are not supported")
        coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, self.root.n)
        shape = np.array([1 << s for s in splits], dtype=np.int64)
        if coords.size and (np.any(coords < 0) or np.any(coords >= shape)):
            raise ValueError("cell coordinates out of range for the covering's splits")
        keys = _linear(coords, splits)
        order = np.unique(keys, return_index=True)[1]
        coords = coords[order]
        coords.setflags(write=False)
        object.__setattr__(self, "splits", splits)
        object.__setattr__(self, "coords", coords)

    # basic geometry -------------------------------------------------------
    @property
    def n(self) -> int:
        return self.root.n

    @property
    def shape(self) -> tuple:
        return tuple(1 << s for s in self.splits)

    @property
    def cell_widths(self) -> np.ndarray:
        return self.root.widths / np.array(self.shape, dtype=float)

    @property
    def diameter(self) -> float:
        return float(np.max(self.cell_widths))

    @property
    def keys(self) -> np.ndarray:
        """Linear (row-major) index of every cell, sorted ascending."""
        return _linear(self.coords, self.splits)

    @property
    def cells(self) -> frozenset:
        return frozenset(tuple(int(v) for v in row) for row in self.coords)

    def __len__(self) -> int:
        return len(self.coords)

    def __contains__(self, cell) -> bool:
        key = _linear(np.asarray(cell, dtype=np.int64).reshape(1, -1), self.splits)
        return bool(self.member_mask_keys(key)[0])

    @property
    def is_empty(self) -> bool:
        return len(self.coords) == 0

    @property
    def volume(self) -> float:
        return len(self) * float(np.prod(self.cell_widths))

    def bounds(self, coords: Optional[np.ndarray] = None) -> tuple:
        """Lower and upper corners for ``coords`` (default: every cell), each ``(N, n)``."""
        c = self.coords if coords is None else np.asarray(coords, dtype=np.int64).reshape(-1, self.n)
        w = self.cell_widths
        lo = np.asarray(self.root.lo) + c * w
        hi = lo + w
        return lo, hi

    def boxes(self) -> list:
        lo, hi = self.bounds()
        return [Box(a, b) for a, b in zip(lo, hi)]

    def with_coords(self, coords: np.ndarray) -> "Covering":
        return Covering(self.root, self.depth, self.splits, coords)

    def subset(self, mask: np.ndarray) -> "Covering":
        return self.with_coords(self.coords[np.asarray(mask, dtype=bool)])

    def member_mask_keys(self, keys: np.ndarray) -> np.ndarray:
        """Boolean mask: which linear indices are cells of this covering."""
        own = self.keys
        if own.size == 0:
            return np.zeros(np.shape(keys), dtype=bool)
        pos = np.searchsorted(own, keys)
        pos = np.minimum(pos, own.size - 1)
        return own[pos] == keys

    def position_of_keys(self, keys: np.ndarray) -> np.ndarray:
        """Row position of each linear index in ``coords``; -1 when absent."""
        own = self.keys
        out = np.full(np.shape(keys), -1, dtype=np.int64)
        if own.size == 0:
            return out
        pos = np.minimum(np.searchsorted(own, keys), own.size - 1)
        hit = own[pos] == keys
        out[hit] = pos[hit]
        return out

    def locate(self, points: np.ndarray) -> tuple:
        """Vectorised point location.

        Returns ``(coords, inside)`` where ``coords`` is ``(M, n)`` and
        ``inside`` flags points lying in the root box.
        """
        return _locate(np.asarray(points, dtype=float).reshape(-1, self.n), self.root, self.splits)

    def linear_index(self, coords: np.ndarray) -> np.ndarray:
        return _linear(np.asarray(coords, dtype=np.int64).reshape(-1, self.n), self.splits)


def _linear(coords: np.ndarray, splits: Sequence[int]) -> np.ndarray:
    key = np.zeros(len(coords), dtype=np.int64)
    for i, s in enumerate(splits):
        key = (key << s) | coords[:, i]
    return key


def _locate(points: np.ndarray, root: Box, splits: Sequence[int]) -> tuple:
    lo = np.asarray(root.lo)
    hi = np.asarray(root.hi)
    shape = np.array([1 << s for s in splits], dtype=np.int64)
    inside = np.all((points >= lo) & (points <= hi), axis=1)
    width = (hi - lo) / shape
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = np.floor((points - lo) / np.where(width > 0, width, 1.0))
    raw = np.nan_to_num(raw, nan=0.0, posinf=0.0, neginf=0.0)
    idx = np.clip(raw, 0, shape - 1).astype(np.int64)
    # floor() of a quotient can land one column off when the point sits
    # within rounding distance of a face; settle it against the true bounds
    cell_lo = lo + idx * width
    down = (points < cell_lo) & (idx > 0)
    idx = idx - down
    cell_hi = lo + (idx + 1) * width
    up = (points >= cell_hi) & (idx < shape - 1)
    idx = idx + up
    return idx, inside


def make_root_covering(X: Box) -> Covering:
    """Depth-zero covering: a single cell equal to ``X``."""
    if not isinstance(X, Box):
        X = Box(*X)
    return Covering(X, 0, (0,) * X.n, np.zeros((1, X.n), dtype=np.int64))


def subdivide(c: Covering) -> Covering:
    """Bisect every cell along dimension ``depth mod n``."""
    d = c.depth % c.n
    splits = list(c.splits)
    splits[d] += 1
    children = np.repeat(c.coords, 2, axis=0)
    children[:, d] *= 2
    children[1::2, d] += 1
    return Covering(c.root, c.depth + 1, tuple(splits), children)


def splits_at_depth(n: int, depth: int) -> tuple:
    return tuple(depth // n + (1 if i < depth % n else 0) for i in range(n))


def cell_bounds(c: Covering, cell: Sequence[int]) -> Box:
    cell = np.asarray(cell, dtype=np.int64).reshape(-1)
    if cell.shape != (c.n,):
        raise ValueError(f"cell id has {cell.size} coordinates, covering has dimension {c.n}")
    if np.any(cell < 0) or np.any(cell >= np.array(c.shape)):
        raise ValueError(f"cell id {tuple(cell)} out of range for splits {c.splits}")
    lo, hi = c.bounds(cell)
    return Box(lo[0], hi[0])


def locate_point(c: Covering, x: Sequence[float]) -> Optional[CellId]:
    """Id of the grid cell containing ``x``, or ``None`` outside the root.

    The id is a grid position; it need not be one of ``c``'s cells.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (c.n,):
        raise ValueError(f"point has dimension {x.size}, covering has dimension {c.n}")
    idx, inside = c.locate(x)
    if not inside[0]:
        return None
    return tuple(int(v) for v in idx[0])


def box_covered_by_union(b: Box, cover: Iterable[Box], tol: float = 1e-9) -> bool:
    """Decide ``b ⊆ ∪ cover`` for closed boxes.

    The box is split recursively, preferring a face of some cover member that
    cuts through it (which makes the recursion finite for unions of boxes)
    and bisecting the widest edge otherwise. A piece narrower than ``tol``
    in every dimension is counted as covered.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    cover = list(cover)
    n = b.n
    if not cover:
        return False
    clo = np.array([c.lo for c in cover], dtype=float)
    chi = np.array([c.hi for c in cover], dtype=float)
    if clo.shape[1] != n:
        raise ValueError(f"cover boxes have dimension {clo.shape[1]}, box has dimension {n}")
    return covered_by_arrays(np.asarray(b.lo, float), np.asarray(b.hi, float), clo, chi, tol)


def covered_by_arrays(lo: np.ndarray, hi: np.ndarray, clo: np.ndarray, chi: np.ndarray, tol: float) -> bool:
    stack = [(lo, hi, clo, chi)]
    while stack:
        lo, hi, clo, chi = stack.pop()
        touch = np.all((clo <= hi) & (chi >= lo), axis=1)
        if not touch.any():
            return False
        clo, chi = clo[touch], chi[touch]
        if np.any(np.all((clo <= lo) & (chi >= hi), axis=1)):
            continue
        widths = hi - lo
        if np.all(widths < tol):
            continue
        cut = None
        for d in np.argsort(-widths, kind="stable"):
            faces = np.concatenate([clo[:, d], chi[:, d]])
            inner = faces[(faces > lo[d]) & (faces < hi[d])]
            if inner.size:
                mid = 0.5 * (lo[d] + hi[d])
                cut = (int(d), float(inner[np.argmin(np.abs(inner - mid))]))
                break
        if cut is None:
            d = int(np.argmax(widths))
            cut = (d, 0.5 * (lo[d] + hi[d]))
        d, v = cut
        left_hi = hi.copy()
        left_hi[d] = v
        right_lo = lo.copy()
        right_lo[d] = v
        stack.append((right_lo, hi, clo, chi))
        stack.append((lo, left_hi, clo, chi))
    return True


def project_to_depth(c: Covering, splits: Sequence[int]) -> np.ndarray:
    """Ancestor coordinates of every cell of ``c`` at coarser ``splits``."""
    shift = np.array(c.splits) - np.array(splits)
    if np.any(shift < 0):
        raise ValueError("target splits are finer than the covering")
    return c.coords >> shift


def is_refinement_subset(fine: Covering, coarse: Covering) -> bool:
    """Exact test of ``∪ fine ⊆ ∪ coarse`` for coverings over the same root."""
    _check_same_root(fine, coarse)
    if fine.is_empty:
        return True
    anc = project_to_depth(fine, coarse.splits)
    return bool(np.all(coarse.member_mask_keys(_linear(anc, coarse.splits))))


def coverings_equal_as_sets(a: Covering, b: Covering) -> bool:
    """True iff ``∪ a == ∪ b`` as point sets; ``b`` must be at least as deep as ``a``."""
    _check_same_root(a, b)
    if b.depth < a.depth:
        raise ValueError("second covering must be at least as deep as the first")
    if a.is_empty or b.is_empty:
        return a.is_empty and b.is_empty
    anc_keys = _linear(project_to_depth(b, a.splits), a.splits)
    uniq, counts = np.unique(anc_keys, return_counts=True)
    per_parent = 1 << (b.depth - a.depth)
    if uniq.size != len(a) or not np.all(counts == per_parent):
        return False
    return bool(np.array_equal(uniq, a.keys))


def _check_same_root(a: Covering, b: Covering) -> None:
    if a.root != b.root:
        raise ValueError(f"coverings have different roots: {a.root} vs {b.root}")


@dataclass(frozen=True)
class CellSetSnapshot:
    covering: Covering
    iteration: int

    @property
    def diameter(self) -> float:
        return self.covering.diameter
