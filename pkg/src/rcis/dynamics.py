"""System models, samplers and the input-affine transformations.

A :class:`SystemModel` wraps a column-wise vector field ``f(x, u, w)``:
each argument is a list of per-coordinate columns (numpy arrays or
:class:`~rcis.interval.Interval` values) and the result is a list of ``n``
columns. Fields written with the operators and the functions of
:mod:`rcis.interval` therefore evaluate pointwise and as natural interval
extensions from the same code.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from rcis import expr
from rcis import interval as iv
from rcis.geometry import Box


class EvaluationError(RuntimeError):
    """The vector field produced a non-finite value."""

    def __init__(self, message: str, coordinate: Optional[int] = None):
        super().__init__(message)
        self.coordinate = coordinate


class SingularInputMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class SystemModel:
    """Dynamics ``x+ = f(x, u, w)`` with box constraints.

    ``U`` is ``None`` for systems without inputs (``m == 0``). When
    ``input_bounds`` is set the admissible inputs depend on the cell: it maps
    cell corners ``(lo, hi)``, each ``(N, n)``, to input bounds ``(N, m)``
    and ``U`` is only their hull.
    """

    name: str
    n: int
    m: int
    f: Callable = field(repr=False, compare=False)
    X: Box = None
    U: Optional[Box] = None
    W: Box = None
    image_inflation: float = 0.0
    expressions: tuple = ()
    parameters: Mapping = field(default_factory=dict, compare=False)
    input_bounds: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("state dimension must be at least 1")
        if self.X is None or self.X.n != self.n:
            raise ValueError(f"X must be a box of dimension {self.n}")
        if self.W is None:
            object.__setattr__(self, "W", Box.point(np.zeros(self.n)))
        if self.W.n != self.n:
            raise ValueError(f"W must have dimension {self.n} (one disturbance per state), got {self.W.n}")
        if self.m == 0:
            if self.U is not None:
                raise ValueError("U must be None when the system has no inputs")
        elif self.U is None or self.U.n != self.m:
            raise ValueError(f"U must be a box of dimension {self.m}")
        if self.image_inflation < 0:
            raise ValueError("image_inflation must be non-negative")
        for label, box in (("U", self.U), ("W", self.W)):
            if box is not None and not box.contains_point(np.zeros(box.n)):
                warnings.warn(f"{label} of model {self.name!r} does not contain the origin", stacklevel=3)

    def with_inflation(self, eps: float) -> "SystemModel":
        return replace(self, image_inflation=float(eps))

    def with_disturbance(self, W: Box) -> "SystemModel":
        return replace(self, W=W)


# evaluation ----------------------------------------------------------------

def _columns(a: np.ndarray, k: int) -> list:
    return [a[:, i] for i in range(k)]


def evaluate_batch(model: SystemModel, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on ``N`` triples; ``x`` and ``w`` are ``(N, n)``, ``u`` is ``(N, m)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    N = len(x)
    u = np.asarray(u, dtype=float).reshape(N, model.m) if model.m else np.zeros((N, 0))
    w = np.broadcast_to(np.asarray(w, dtype=float), (N, model.n))
    with np.errstate(all="ignore"):
        cols = model.f(_columns(x, model.n), _columns(u, model.m), _columns(w, model.n))
        out = np.empty((N, model.n))
        for i, c in enumerate(cols):
            out[:, i] = c
    bad = ~np.isfinite(out)
    if bad.any():
        row, coord = np.argwhere(bad)[0]
        raise EvaluationError(
            f"{model.name}: coordinate {coord + 1} of f is not finite at x={x[row].tolist()}, "
            f"u={u[row].tolist()}, w={w[row].tolist()}",
            coordinate=int(coord),
        )
    return out


def eval(model: SystemModel, x, u, w) -> np.ndarray:  # noqa: A001 - public name of the operation
    """Next state ``f(x, u, w)`` for a single point (no image inflation applied)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u if u is not None else [], dtype=float).reshape(-1)
    w = np.asarray(w if w is not None else np.zeros(model.n), dtype=float).reshape(-1)
    if x.size != model.n or w.size != model.n or u.size != model.m:
        raise ValueError(
            f"dimension mismatch: expected x:{model.n}, u:{model.m}, w:{model.n}; got {x.size}, {u.size}, {w.size}"
        )
    return evaluate_batch(model, x[None], u[None], w[None])[0]


def evaluate_interval_batch(model: SystemModel, lo: np.ndarray, hi: np.ndarray, u_lo, u_hi, w) -> tuple:
    """Natural interval extension over ``N`` state boxes.

    ``u_lo``/``u_hi`` broadcast to ``(N, m)``; ``w`` is one disturbance point.
    """
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    N = len(lo)
    xs = [iv.Interval(lo[:, i], hi[:, i]) for i in range(model.n)]
    if model.m:
        ul = np.broadcast_to(np.asarray(u_lo, dtype=float), (N, model.m))
        uh = np.broadcast_to(np.asarray(u_hi, dtype=float), (N, model.m))
        us = [iv.Interval(ul[:, j], uh[:, j]) for j in range(model.m)]
    else:
        us = []
    w = np.asarray(w, dtype=float).reshape(-1)
    ws = [float(v) for v in w]
    with np.errstate(all="ignore"):
        cols = model.f(xs, us, ws)
    out_lo = np.empty((N, model.n))
    out_hi = np.empty((N, model.n))
    for i, c in enumerate(cols):
        c = iv.as_interval(c)
        out_lo[:, i] = c.lo
        out_hi[:, i] = c.hi
    if not (np.all(np.isfinite(out_lo)) and np.all(np.isfinite(out_hi))):
        coord = int(np.argwhere(~(np.isfinite(out_lo) & np.isfinite(out_hi)))[0][1])
        raise EvaluationError(f"{model.name}: interval enclosure of coordinate {coord + 1} is unbounded", coord)
    return out_lo, out_hi


def eval_interval(model: SystemModel, xbox: Box, ubox: Optional[Box], wpoint) -> Box:
    """Box enclosing ``{f(x, u, wpoint) : x in xbox, u in ubox}``."""
    if xbox.n != model.n:
        raise ValueError("xbox dimension mismatch")
    if model.m:
        if ubox is None or ubox.n != model.m:
            raise ValueError("ubox dimension mismatch")
        ul, uh = np.asarray(ubox.lo), np.asarray(ubox.hi)
    else:
        ul = uh = np.zeros(0)
    wpoint = np.zeros(model.n) if wpoint is None else wpoint
    lo, hi = evaluate_interval_batch(model, np.asarray(xbox.lo)[None], np.asarray(xbox.hi)[None], ul, uh, wpoint)
    return Box(lo[0], hi[0])


# expression-defined systems -------------------------------------------------

def parse_expression_system(
    texts: Sequence[str],
    X: Box,
    U: Optional[Box] = None,
    W: Optional[Box] = None,
    parameters: Optional[Mapping[str, float]] = None,
    name: str = "expressions",
) -> SystemModel:
    """Build a model from one expression per state coordinate.

    ``n`` is the number of expressions and ``m`` the dimension of ``U``.
    Parse errors report the expression (line) and column.
    """
    texts = list(texts)
    n = len(texts)
    m = 0 if U is None else U.n
    if X.n != n:
        raise ValueError(f"{n} expressions given but X has dimension {X.n}")
    params = dict(parameters or {})
    dims = {"x": n, "u": m, "w": n}
    nodes = tuple(expr.parse(t, line=i + 1, parameters=params, dims=dims) for i, t in enumerate(texts))
    return SystemModel(
        name=name,
        n=n,
        m=m,
        f=expr.compile_field(nodes, params),
        X=X,
        U=U,
        W=W,
        expressions=tuple(texts),
        parameters=params,
    )


# input-affine structure ----------------------------------------------------

MatrixField = Union[np.ndarray, Callable]


@dataclass(frozen=True)
class AffineParts:
    """``x+ = f0(x) + g(x) u + h(x) w``.

    ``g`` and ``h`` are either constant arrays or callables mapping state
    columns to nested ``n x m`` (``n x n``) lists of entries.
    """

    name: str
    drift: Callable = field(repr=False)
    g: MatrixField = None
    h: MatrixField = None
    X: Box = None
    U: Box = None
    W: Box = None

    @property
    def n(self) -> int:
        return self.X.n

    @property
    def m(self) -> int:
        return self.U.n

    @property
    def constant_g(self) -> bool:
        return not callable(self.g)

    @property
    def constant_h(self) -> bool:
        return not callable(self.h)

    def g_at(self, x_cols) -> list:
        if self.constant_g:
            return np.asarray(self.g, dtype=float).tolist()
        return self.g(x_cols)

    def h_at(self, x_cols) -> list:
        if self.constant_h:
            return np.asarray(self.h, dtype=float).tolist()
        return self.h(x_cols)

    def to_model(self, name: Optional[str] = None) -> SystemModel:
        parts = self

        def f(x, u, w):
            out = list(parts.drift(x))
            g = parts.g_at(x)
            h = parts.h_at(x)
            for i in range(parts.n):
                out[i] = _affine_row(out[i], g[i], u)
                out[i] = _affine_row(out[i], h[i], w)
            return out

        return SystemModel(name or self.name, self.n, self.m, f, self.X, self.U, self.W)


def _affine_row(acc, coeffs, values):
    for c, v in zip(coeffs, values):
        if isinstance(c, (int, float)) and c == 0:
            continue
        acc = acc + c * v
    return acc


def augment_inputs(parts: AffineParts, columns: MatrixField) -> AffineParts:
    """Append inputs pinned to ``{0}`` so that ``g`` becomes square.

    ``columns`` is an ``n x a`` array (or a callable returning nested lists).
    The dynamics are unchanged for the only admissible value ``u_a = 0``.
    """
    n, m = parts.n, parts.m
    if callable(columns):
        probe = columns([np.zeros(1)] * n)
        a = len(probe[0]) if n else 0
    else:
        columns = np.asarray(columns, dtype=float).reshape(n, -1)
        a = columns.shape[1]
    if m + a != n:
        raise ValueError(f"augmenting {m} inputs with {a} columns gives a {n}x{m + a} input matrix, not square")
    if a == 0:
        return parts
    if parts.constant_g and not callable(columns):
        g = np.hstack([np.asarray(parts.g, dtype=float), columns])
    else:
        base = parts

        def g(x_cols):
            extra = columns(x_cols) if callable(columns) else columns.tolist()
            return [list(r1) + list(r2) for r1, r2 in zip(base.g_at(x_cols), extra)]

    U = Box(tuple(parts.U.lo) + (0.0,) * a, tuple(parts.U.hi) + (0.0,) * a)
    return replace(parts, g=g, U=U, name=f"{parts.name}_augmented")


@dataclass(frozen=True)
class CancellationReport:
    """Outcome of the input transformation ``u = -g^{-1} h w + v``.

    ``v_bounds`` bounds every component of ``v``; ``control`` lists the
    components that stay free inputs and ``disturbance`` those that act as
    residual disturbances. For state-dependent ``g`` the bounds are the hull
    over ``X``; per-cell bounds come from the model's ``input_bounds``.
    """

    v_bounds: Box
    control: tuple
    disturbance: tuple
    condition: float
    state_dependent: bool
    transformed: bool = True
    piece_splits: int = 0

    @property
    def graphs_per_iteration(self) -> int:
        return int(np.prod([1 if self.v_bounds.lo[j] == self.v_bounds.hi[j] else 2 for j in self.disturbance]))


def _box_product_range(M: np.ndarray, W: Box) -> tuple:
    """Componentwise range of ``M w`` for ``w`` in ``W`` (exact for constant ``M``)."""
    a = M * np.asarray(W.lo)[None, :]
    b = M * np.asarray(W.hi)[None, :]
    return np.minimum(a, b).sum(axis=1), np.maximum(a, b).sum(axis=1)


def cancel_disturbance(parts: AffineParts) -> tuple:
    """Cancel disturbances through ``u = -g(x)^{-1} h(x) w + v``.

    Returns ``(model, report)``. The model has dynamics
    ``f0(x) + g(x) v``: components of ``v`` whose input range has positive
    width remain inputs, shrunk so that the original input constraint holds
    for every disturbance; components fed by inputs pinned to a point become
    residual disturbances.
    """
    n, m = parts.n, parts.m
    if m != n:
        raise SingularInputMatrixError(
            f"input matrix is {n}x{m}; add inputs pinned to zero with augment_inputs() to make it square"
        )
    if parts.constant_g and parts.constant_h:
        return _cancel_constant(parts)
    return _cancel_state_dependent(parts)


def _classify(U: Box, mw_lo: np.ndarray, mw_hi: np.ndarray) -> tuple:
    ulo, uhi = np.asarray(U.lo), np.asarray(U.hi)
    control = tuple(int(j) for j in np.flatnonzero(uhi > ulo))
    vlo = np.where(uhi > ulo, ulo + mw_hi, ulo + mw_lo)
    vhi = np.where(uhi > ulo, uhi + mw_lo, uhi + mw_hi)
    disturbance = tuple(int(j) for j in np.flatnonzero((uhi == ulo) & (vhi > vlo)))
    return control, disturbance, vlo, vhi


def _cancel_constant(parts: AffineParts) -> tuple:
    g = np.asarray(parts.g, dtype=float)
    h = np.asarray(parts.h, dtype=float)
    n = parts.n
    cond = float(np.linalg.cond(g))
    if np.linalg.matrix_rank(g) < n or not np.isfinite(cond) or cond > 1e12:
        raise SingularInputMatrixError(
            f"input matrix g is singular (condition {cond:.3g}); make it invertible by adding inputs "
            "pinned to zero with augment_inputs()"
        )
    M = np.linalg.solve(g, h)
    M[np.abs(M) < 1e-15] = 0.0
    mw_lo, mw_hi = _box_product_range(M, parts.W)
    control, disturbance, vlo, vhi = _classify(parts.U, mw_lo, mw_hi)
    for j in control:
        if vlo[j] > vhi[j]:
            raise ValueError(f"disturbance on input {j + 1} exceeds its range; no admissible v remains")
    report = CancellationReport(Box(vlo, vhi), control, disturbance, cond, state_dependent=False)
    fixed = [j for j in range(n) if j not in control and j not in disturbance]
    drift = parts.drift

    def f(x, v, w):
        out = list(drift(x))
        for i in range(n):
            for k, j in enumerate(control):
                if g[i, j] != 0:
                    out[i] = out[i] + g[i, j] * v[k]
            for j in disturbance:
                if g[i, j] != 0:
                    out[i] = out[i] + g[i, j] * w[j]
            for j in fixed:
                if g[i, j] != 0 and vlo[j] != 0:
                    out[i] = out[i] + g[i, j] * vlo[j]
        return out

    model = SystemModel(
        f"{parts.name}_transformed",
        n,
        len(control),
        f,
        parts.X,
        Box(vlo[list(control)], vhi[list(control)]) if control else None,
        _residual_box(n, disturbance, vlo, vhi),
    )
    return model, report


def _residual_box(n: int, disturbance: Sequence[int], vlo, vhi) -> Box:
    lo = np.zeros(n)
    hi = np.zeros(n)
    for j in disturbance:
        lo[j], hi[j] = vlo[j], vhi[j]
    return Box(lo, hi)


def _interval_solve(G: list, H: list) -> tuple:
    """Enclose ``G^{-1} H`` by interval Gauss-Jordan elimination without pivoting.

    Entries are Intervals (or scalars) over a batch. Returns the ``n x n``
    result and a mask of batch rows where every pivot excluded zero.
    """
    n = len(G)
    A = [[iv.as_interval(G[i][j]) for j in range(n)] + [iv.as_interval(H[i][k]) for k in range(n)] for i in range(n)]
    shape = np.broadcast_shapes(*(e.lo.shape for row in A for e in row))
    ok = np.ones(shape, dtype=bool)
    for col in range(n):
        piv = A[col][col]
        bad = np.broadcast_to(piv.contains_zero(), shape)
        ok &= ~bad
        # stand-in pivot where verification failed keeps the batch computable
        piv = iv.Interval(np.where(bad, 1.0, piv.lo), np.where(bad, 1.0, piv.hi))
        inv = piv.reciprocal()
        A[col] = [e * inv for e in A[col]]
        for r in range(n):
            if r == col:
                continue
            factor = A[r][col]
            A[r] = [a - factor * p for a, p in zip(A[r], A[col])]
    return [[A[i][n + k] for k in range(n)] for i in range(n)], ok


def _piece_bounds(parts: AffineParts, lo: np.ndarray, hi: np.ndarray) -> tuple:
    """Input-transform data on a batch of boxes: ``(vlo, vhi, ok)``, each ``(N, n)``."""
    n = parts.n
    xs = [iv.Interval(lo[:, i], hi[:, i]) for i in range(n)]
    G = parts.g_at(xs)
    H = parts.h_at(xs)
    M, ok = _interval_solve(G, H)
    wl, wh = np.asarray(parts.W.lo), np.asarray(parts.W.hi)
    ulo, uhi = np.asarray(parts.U.lo), np.asarray(parts.U.hi)
    N = len(lo)
    vlo = np.empty((N, n))
    vhi = np.empty((N, n))
    for i in range(n):
        acc = iv.Interval(np.zeros(N))
        for k in range(n):
            acc = acc + M[i][k] * iv.Interval(wl[k], wh[k])
        mlo = np.broadcast_to(acc.lo, (N,))
        mhi = np.broadcast_to(acc.hi, (N,))
        if uhi[i] > ulo[i]:
            vlo[:, i] = ulo[i] + mhi
            vhi[:, i] = uhi[i] + mlo
        else:
            vlo[:, i] = ulo[i] + mlo
            vhi[:, i] = uhi[i] + mhi
    return vlo, vhi, ok


def _grid_pieces(X: Box, per_dim: int) -> tuple:
    axes = [np.linspace(a, b, per_dim + 1) for a, b in zip(X.lo, X.hi)]
    idx = np.stack(np.meshgrid(*[np.arange(per_dim)] * X.n, indexing="ij"), axis=-1).reshape(-1, X.n)
    lo = np.stack([axes[i][idx[:, i]] for i in range(X.n)], axis=1)
    hi = np.stack([axes[i][idx[:, i] + 1] for i in range(X.n)], axis=1)
    return lo, hi


def _cancel_state_dependent(parts: AffineParts, max_splits: int = 7) -> tuple:
    n = parts.n
    X = parts.X
    verified = None
    for s in range(max_splits + 1):
        per_dim = 1 << s
        if per_dim ** n > 200_000:
            break
        lo, hi = _grid_pieces(X, per_dim)
        vlo, vhi, ok = _piece_bounds(parts, lo, hi)
        if ok.all():
            verified = (s, vlo, vhi)
            break
    if verified is None:
        warnings.warn(
            f"{parts.name}: input matrix is not verifiably invertible over X; disturbance is not cancelled",
            stacklevel=2,
        )
        model = parts.to_model()
        report = CancellationReport(
            Box(parts.U.lo, parts.U.hi), tuple(range(parts.m)), (), float("nan"), True, transformed=False
        )
        return model, report

    s, vlo, vhi = verified
    ulo, uhi = np.asarray(parts.U.lo), np.asarray(parts.U.hi)
    control = tuple(int(j) for j in np.flatnonzero(uhi > ulo))
    disturbance = tuple(int(j) for j in np.flatnonzero((uhi == ulo) & (vhi.max(axis=0) > vlo.min(axis=0))))
    fixed = [j for j in range(n) if j not in control and j not in disturbance]
    hull_lo = vlo.min(axis=0)
    hull_hi = vhi.max(axis=0)
    for j in fixed:
        hull_lo[j] = hull_hi[j] = ulo[j]
    piece_w = X.widths / (1 << s)
    report = CancellationReport(
        Box(np.where(np.isin(np.arange(n), control), np.minimum(hull_lo, hull_hi), hull_lo),
            np.where(np.isin(np.arange(n), control), np.maximum(hull_lo, hull_hi), hull_hi)),
        control,
        disturbance,
        float("nan"),
        state_dependent=True,
        piece_splits=s,
    )
    ctrl = list(control)

    def input_bounds(cell_lo: np.ndarray, cell_hi: np.ndarray) -> tuple:
        cell_lo = np.atleast_2d(cell_lo)
        cell_hi = np.atleast_2d(cell_hi)
        N = len(cell_lo)
        reps = np.maximum(1, np.ceil((cell_hi[0] - cell_lo[0]) / piece_w - 1e-9)).astype(int)
        offs = np.stack(np.meshgrid(*[np.arange(r) for r in reps], indexing="ij"), axis=-1).reshape(-1, n)
        step = (cell_hi - cell_lo) / reps
        sub_lo = (cell_lo[:, None, :] + offs[None] * step[:, None, :]).reshape(-1, n)
        sub_hi = sub_lo + np.repeat(step, len(offs), axis=0)
        plo, phi, ok = _piece_bounds(parts, sub_lo, sub_hi)
        plo = plo.reshape(N, len(offs), n)[:, :, ctrl].max(axis=1)
        phi = phi.reshape(N, len(offs), n)[:, :, ctrl].min(axis=1)
        bad = ~ok.reshape(N, len(offs)).all(axis=1)
        plo[bad] = np.inf
        phi[bad] = -np.inf
        return plo, phi

    drift = parts.drift

    def f(x, v, w):
        out = list(drift(x))
        g = parts.g_at(x)
        for i in range(n):
            for k, j in enumerate(control):
                out[i] = out[i] + g[i][j] * v[k]
            for j in disturbance:
                out[i] = out[i] + g[i][j] * w[j]
            for j in fixed:
                if ulo[j] != 0:
                    out[i] = out[i] + g[i][j] * ulo[j]
        return out

    U = None
    if control:
        clo = np.minimum(vlo[:, ctrl].min(axis=0), vhi[:, ctrl].max(axis=0))
        chi = vhi[:, ctrl].max(axis=0)
        U = Box(clo, chi)
    model = SystemModel(
        f"{parts.name}_transformed",
        n,
        len(control),
        f,
        X,
        U,
        _residual_box(n, disturbance, hull_lo, hull_hi),
        input_bounds=input_bounds,
    )
    return model, report


# samplers --------------------------------------------------------------------

CELL_STRATEGIES = ("uniform", "boundary", "center", "random")
DISTURBANCE_MODES = ("vertices", "grid")
BOUNDARY_INSET = 1e-9
UNIFORM_MARGIN = 0.1


@dataclass(frozen=True)
class SamplerConfig:
    cell_strategy: str = "boundary"
    cell_samples: int = 10
    input_samples: int = 5
    disturbance_mode: str = "vertices"
    disturbance_samples_per_dim: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.cell_strategy not in CELL_STRATEGIES:
            raise ValueError(f"unknown cell sampling strategy {self.cell_strategy!r}")
        if self.disturbance_mode not in DISTURBANCE_MODES:
            raise ValueError(f"unknown disturbance sampling mode {self.disturbance_mode!r}")
        for name in ("cell_samples", "input_samples", "disturbance_samples_per_dim"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.rng_seed is None or int(self.rng_seed) < 0:
            raise ValueError("rng_seed must be a non-negative integer")


def unit_template(cfg: SamplerConfig, n: int) -> np.ndarray:
    """Deterministic sample pattern on the unit cell ``[0, 1]^n``."""
    k = cfg.cell_samples
    if cfg.cell_strategy == "center" or (cfg.cell_strategy == "uniform" and k == 1):
        return np.full((1, n), 0.5)
    if cfg.cell_strategy == "uniform":
        per = max(1, int(round(k ** (1.0 / n))))
        axis = np.linspace(UNIFORM_MARGIN, 1 - UNIFORM_MARGIN, per) if per > 1 else np.array([0.5])
        grid = np.meshgrid(*[axis] * n, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)
    if cfg.cell_strategy == "boundary":
        return _boundary_template(k, n)
    raise ValueError("random sampling has no fixed template")


def _boundary_template(k: int, n: int) -> np.ndarray:
    d = BOUNDARY_INSET
    a, b = d, 1.0 - d
    if n == 1:
        return np.array([[a], [b]]) if k > 1 else np.array([[a]])
    if n == 2:
        side = b - a
        s = np.arange(k) * (4 * side / k)
        pts = np.empty((k, 2))
        for i, t in enumerate(s):
            edge, r = divmod(t, side)
            edge = int(min(edge, 3))
            r = t - edge * side
            if edge == 0:
                pts[i] = (a + r, a)
            elif edge == 1:
                pts[i] = (b, a + r)
            elif edge == 2:
                pts[i] = (b - r, b)
            else:
                pts[i] = (a, b - r)
        return pts
    g = 2
    while g ** n - (g - 2) ** n < k:
        g += 1
    axis = np.linspace(a, b, g)
    grid = np.stack(np.meshgrid(*[np.arange(g)] * n, indexing="ij"), axis=-1).reshape(-1, n)
    on_face = np.any((grid == 0) | (grid == g - 1), axis=1)
    lattice = axis[grid[on_face]]
    pick = np.unique(np.round(np.linspace(0, len(lattice) - 1, k)).astype(int))
    return lattice[pick]


def _float_key(b: Box) -> list:
    bits = np.concatenate([np.asarray(b.lo), np.asarray(b.hi)]).view(np.uint64)
    return [int(v) for v in bits]


def _random_unit(cfg: SamplerConfig, n: int, key: Sequence[int]) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.rng_seed), *[int(v) for v in key]]))
    d = BOUNDARY_INSET
    return d + (1 - 2 * d) * rng.random((cfg.cell_samples, n))


def sample_cell(b: Box, cfg: SamplerConfig, key: Optional[Sequence[int]] = None) -> np.ndarray:
    """Sample points inside the half-open cell ``b``.

    ``key`` identifies the cell for the random strategy (default: the box's
    bit pattern) so every cell gets its own reproducible stream.
    """
    if cfg.cell_strategy == "random":
        unit = _random_unit(cfg, b.n, _float_key(b) if key is None else key)
    else:
        unit = unit_template(cfg, b.n)
    return np.asarray(b.lo) + unit * b.widths


def sample_cells(lo: np.ndarray, hi: np.ndarray, cfg: SamplerConfig, keys: Optional[np.ndarray] = None) -> np.ndarray:
    """Samples for a batch of equally sized cells: ``(N, S, n)``."""
    N, n = lo.shape
    if cfg.cell_strategy == "random":
        if keys is None:
            keys = [_float_key(Box(a, b)) for a, b in zip(lo, hi)]
        unit = np.stack([_random_unit(cfg, n, k) for k in keys])
    else:
        unit = np.broadcast_to(unit_template(cfg, n), (N, *unit_template(cfg, n).shape))
    return lo[:, None, :] + unit * (hi - lo)[:, None, :]


def _lattice(lo: Sequence[float], hi: Sequence[float], per_dim: int) -> np.ndarray:
    axes = [np.array([a]) if a == b else np.linspace(a, b, per_dim) for a, b in zip(lo, hi)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def sample_inputs(U: Optional[Box], cfg: SamplerConfig) -> np.ndarray:
    """Input samples ``(K, m)``: a lattice with ``input_samples`` points per dimension, ends included."""
    if U is None:
        return np.zeros((1, 0))
    if cfg.input_samples == 1:
        return U.center[None, :]
    return _lattice(U.lo, U.hi, cfg.input_samples)


def input_unit_template(m: int, cfg: SamplerConfig) -> np.ndarray:
    if m == 0:
        return np.zeros((1, 0))
    if cfg.input_samples == 1:
        return np.full((1, m), 0.5)
    return _lattice([0.0] * m, [1.0] * m, cfg.input_samples)


def sample_disturbances(W: Box, cfg: SamplerConfig) -> np.ndarray:
    """Disturbance samples ``(L, n)``: the distinct vertices of ``W`` or a lattice including them."""
    if cfg.disturbance_mode == "vertices":
        active = int(np.count_nonzero(W.widths > 0))
        if active > 20:
            raise ValueError(f"vertex sampling of a {active}-dimensional disturbance box is too large")
        return W.vertices()
    return _lattice(W.lo, W.hi, max(2, cfg.disturbance_samples_per_dim))


def cell_input_samples(model: SystemModel, lo: np.ndarray, hi: np.ndarray, cfg: SamplerConfig) -> tuple:
    """Input samples per cell: ``(N, K, m)`` and a mask of cells with admissible inputs."""
    N = len(lo)
    if model.input_bounds is None or model.m == 0:
        us = sample_inputs(model.U, cfg)
        return np.broadcast_to(us, (N, *us.shape)), np.ones(N, dtype=bool)
    vlo, vhi = model.input_bounds(lo, hi)
    valid = np.all(vlo <= vhi, axis=1)
    unit = input_unit_template(model.m, cfg)
    span = np.where(valid[:, None], vhi - vlo, 0.0)
    base = np.where(valid[:, None], vlo, 0.0)
    return base[:, None, :] + unit[None] * span[:, None, :], valid
