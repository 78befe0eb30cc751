"""Acceptance suite: one or more tests per criterion, summarised by conftest.

Heavy runs are shared through module-scoped fixtures so every engine run
happens once per session.
"""

import json
import time

import numpy as np
import pytest

from rcis import systems
from rcis.algorithms import RunConfig, one_step_invariance_check, run
from rcis.cli import main
from rcis.dynamics import SamplerConfig, cancel_disturbance, parse_expression_system, sample_disturbances
from rcis.geometry import Box, is_refinement_subset, make_root_covering, subdivide
from rcis.invariance import forward_invariant_vertices
from rcis.oracle import grid_discriminating_kernel, symmetric_difference_volume
from rcis.symbolic_image import Digraph, build_symbolic_image

criterion = pytest.mark.criterion

T, MU = 0.01, 0.9
EXAMPLE2_TEXTS = [
    "x1 + T * x2 + T * (mu + (1 - mu) * x1) * u1 + T * w1",
    "T * x1 + x2 + T * (mu - 4 * (1 - mu) * x2) * u1 + T * w2",
]
SIN_TEXTS = ["0.9 * x1 + 0.4 * sin(x2) + w1", "x2 - 0.3 * x1 * x1 + u1 + w2"]


def deep(X, k):
    c = make_root_covering(X)
    for _ in range(k):
        c = subdivide(c)
    return c


def timed_run(model, cfg):
    t0 = time.perf_counter()
    rep = run(model, cfg)
    return rep, time.perf_counter() - t0


def example2_expressions():
    return parse_expression_system(
        EXAMPLE2_TEXTS, Box.cube(4.0, 2), U=Box.cube(2.0, 1), W=Box.cube(0.4, 2),
        parameters={"T": T, "mu": MU}, name="example2_expr",
    )


def sin_system():
    return parse_expression_system(SIN_TEXTS, Box.cube(2.0, 2), U=Box.cube(0.5, 1), W=Box.cube(0.1, 2), name="sin2d")


@pytest.fixture(scope="module")
def ex1_outer():
    return timed_run(systems.example1_linear(), RunConfig(mode="outer", N=16))


@pytest.fixture(scope="module")
def ex1_inner():
    return timed_run(systems.example1_linear(), RunConfig(mode="inner", N=16, eps=0.001))


@pytest.fixture(scope="module")
def ex1_oracle():
    return grid_discriminating_kernel(systems.example1_linear(), 100, SamplerConfig())


@pytest.fixture(scope="module")
def ex2_inner():
    return timed_run(systems.example2_nonlinear(T=T, mu=MU), RunConfig(mode="inner", N=16, eps=0.001))


@pytest.fixture(scope="module")
def rotation():
    return timed_run(systems.rotation2d(), RunConfig(mode="outer", N=16))


# 1 ---------------------------------------------------------------------------

FIG3_EDGES = [
    ("B2", "B3"), ("B3", "B4"), ("B4", "B5"), ("B5", "B2"),
    ("B8", "B9"), ("B9", "B5"), ("B2", "B1"), ("B2", "B7"), ("B4", "B6"),
]


@criterion(1, "Figure-3 fixture: members {B2,B3,B4,B5,B8,B9}, recurrent {B2..B5}, < 1 ms")
def test_figure3_fixture(acceptance):
    g = Digraph.from_edges([f"B{i}" for i in range(1, 10)], FIG3_EDGES)
    forward_invariant_vertices(g)
    best = min(
        (lambda t0: (forward_invariant_vertices(g), time.perf_counter() - t0)[1])(time.perf_counter())
        for _ in range(20)
    )
    s = forward_invariant_vertices(g)
    acceptance(f"{best * 1e3:.3f} ms")
    assert s.members == {"B2", "B3", "B4", "B5", "B8", "B9"}
    assert s.recurrent == {"B2", "B3", "B4", "B5"}
    assert best < 1e-3


# 2 ---------------------------------------------------------------------------

@criterion(2, "Symbolic-image fixture: shift on 16 cells, 4 successors / out-degree 0")
def test_shift_symbolic_image(acceptance):
    cov = deep(Box.cube(2.0, 2), 4)
    g = build_symbolic_image(systems.shift2d(), cov, (0.0, 0.0), SamplerConfig())
    succ = sorted(g.successors((0, 0)))
    acceptance(f"successors of [-2,-1]^2: {succ}")
    assert succ == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert g.out_degree((3, 3)) == 0


# 3 ---------------------------------------------------------------------------

def _nested(rep):
    return all(is_refinement_subset(b, a) for a, b in zip(rep.coverings, rep.coverings[1:]))


MATRIX = {
    "shift2d outer": lambda: run(systems.shift2d(), RunConfig(N=8)),
    "identity outer": lambda: run(systems.identity(), RunConfig(N=8)),
    "example1_transformed inner": lambda: run(systems.example1_transformed(), RunConfig(mode="inner", N=12)),
    "example1 interval outer": lambda: run(
        parse_expression_system(["x2 + w1", "x1 + x2 + u1 + w2"], Box.cube(5.0, 2), U=Box.cube(2.0, 1), W=Box.cube(0.3, 2)),
        RunConfig(N=10, method="interval"),
    ),
    "sin2d inner inflation": lambda: run(sin_system(), RunConfig(mode="inner", N=10, eps_mode="inflation")),
    "example1 outer refined": lambda: run(systems.example1_linear(), RunConfig(N=10, refine_level=True)),
}


@criterion(3, "Nesting: union(R_k+1) within union(R_k) at every iteration, >= 6 configs")
@pytest.mark.parametrize("name", sorted(MATRIX))
def test_nesting_matrix(name):
    assert _nested(MATRIX[name]())


@criterion(3, "Nesting: union(R_k+1) within union(R_k) at every iteration, >= 6 configs")
def test_nesting_heavy_runs(ex1_outer, ex1_inner, ex2_inner, rotation, acceptance):
    runs = [ex1_outer[0], ex1_inner[0], ex2_inner[0], rotation[0]]
    acceptance(f"{len(MATRIX) + len(runs)} configs")
    assert all(_nested(r) for r in runs)


# 4 ---------------------------------------------------------------------------

@criterion(4, "Rotation: retained area within 5% of 25*pi at depth >= 12, < 60 s")
def test_rotation_area(rotation, acceptance):
    rep, seconds = rotation
    ratio = rep.covering.volume / (25 * np.pi)
    acceptance(f"depth {rep.covering.depth}, area/25pi = {ratio:.4f}, {seconds:.1f} s")
    assert rep.covering.depth >= 12
    assert abs(ratio - 1) <= 0.05
    assert seconds < 60


# 5 ---------------------------------------------------------------------------

@criterion(5, "Shift system terminates 'empty' within 8 iterations")
def test_shift_empty(acceptance):
    rep = run(systems.shift2d(), RunConfig(N=16))
    acceptance(f"{rep.termination} after {rep.iterations}")
    assert rep.termination == "empty"
    assert rep.iterations <= 8


# 6 ---------------------------------------------------------------------------

@criterion(6, "Example 1: inner nonempty, inner within outer, one-step = 1.0, oracle diff <= 10%, < 10 min")
def test_example1_inner_nonempty_and_within_outer(ex1_outer, ex1_inner, acceptance):
    outer, t_out = ex1_outer
    inner, t_in = ex1_inner
    acceptance(f"inner {len(inner.covering)} cells / vol {inner.covering.volume:.3f} ({inner.termination}, {t_in:.0f} s)")
    acceptance(f"outer {len(outer.covering)} cells / vol {outer.covering.volume:.3f} ({outer.termination}, {t_out:.0f} s)")
    assert not inner.covering.is_empty
    same_depth = [c for c in outer.coverings if c.depth == inner.covering.depth]
    assert same_depth, "outer run never reached the inner depth"
    assert inner.covering.cells <= same_depth[0].cells
    assert t_in + t_out < 600


@criterion(6, "Example 1: inner nonempty, inner within outer, one-step = 1.0, oracle diff <= 10%, < 10 min")
def test_example1_one_step_check(ex1_inner, acceptance):
    inner, _ = ex1_inner
    chk = one_step_invariance_check(systems.example1_linear(), inner.covering, inner.covering, inner.config.sampler)
    acceptance(f"one-step pass fraction {chk.pass_fraction:.6f} ({chk.failed}/{chk.checked} fail)")
    assert chk.pass_fraction == 1.0, chk.witnesses[:3]


@criterion(6, "Example 1: inner nonempty, inner within outer, one-step = 1.0, oracle diff <= 10%, < 10 min")
def test_example1_oracle_agreement(ex1_outer, ex1_inner, ex1_oracle, acceptance):
    k = ex1_oracle
    for label, rep in (("inner", ex1_inner[0]), ("outer", ex1_outer[0])):
        diff = symmetric_difference_volume(rep.covering, k)
        acceptance(f"{label} sym-diff {diff / k.volume:.3%} of oracle {k.volume:.2f}")
        assert diff <= 0.10 * k.volume


# 7 ---------------------------------------------------------------------------

@criterion(7, "Example 1 transform: |v1| <= 1.7, |v2| <= 0.3, 2 graphs vs 4")
def test_example1_transform(acceptance):
    _, rep = cancel_disturbance(systems.example1_augmented())
    assert tuple(rep.v_bounds.lo) == (-1.7, -0.3) or np.allclose(rep.v_bounds.lo, (-1.7, -0.3), rtol=0, atol=1e-15)
    assert np.allclose(rep.v_bounds.hi, (1.7, 0.3), rtol=0, atol=1e-15)
    transformed = run(systems.example1_transformed(), RunConfig(N=2))
    original = run(systems.example1_linear(), RunConfig(N=2))
    acceptance(f"v in [{rep.v_bounds.lo}, {rep.v_bounds.hi}], graphs {transformed.records[0].graphs} vs {original.records[0].graphs}")
    assert [r.graphs for r in transformed.records] == [2, 2]
    assert [r.graphs for r in original.records] == [4, 4]


# 8 ---------------------------------------------------------------------------

@criterion(8, "Example 2 inner: 16 subdivisions, nonempty, one-step = 1.0, < 30 min")
def test_example2_inner_completes(ex2_inner, acceptance):
    rep, seconds = ex2_inner
    acceptance(f"{rep.iterations} iterations, {len(rep.covering)} cells, vol {rep.covering.volume:.2f}, {seconds:.0f} s")
    assert rep.iterations == 16
    assert not rep.covering.is_empty
    assert seconds < 1800


@criterion(8, "Example 2 inner: 16 subdivisions, nonempty, one-step = 1.0, < 30 min")
def test_example2_one_step_check(ex2_inner, acceptance):
    rep, _ = ex2_inner
    m = systems.example2_nonlinear(T=T, mu=MU)
    chk = one_step_invariance_check(m, rep.covering, rep.covering, rep.config.sampler)
    acceptance(f"one-step pass fraction {chk.pass_fraction:.6f} ({chk.failed}/{chk.checked} fail)")
    assert chk.pass_fraction == 1.0, chk.witnesses[:3]


# 9 ---------------------------------------------------------------------------

INTERVAL_MATRIX = {
    "example1": lambda: parse_expression_system(
        ["x2 + w1", "x1 + x2 + u1 + w2"], Box.cube(5.0, 2), U=Box.cube(2.0, 1), W=Box.cube(0.3, 2)
    ),
    "example2": example2_expressions,
    "rotation": lambda: parse_expression_system(
        ["cos(1) * x1 - sin(1) * x2", "sin(1) * x1 + cos(1) * x2"], Box.cube(5.0, 2)
    ),
    "sin2d": sin_system,
}


@criterion(9, "Interval edges contain sampling edges for expression systems")
@pytest.mark.parametrize("name", sorted(INTERVAL_MATRIX))
@pytest.mark.parametrize("depth", [4, 8, 10])
def test_interval_superset(name, depth):
    model = INTERVAL_MATRIX[name]()
    cov = deep(model.X, depth)
    cfg = SamplerConfig()
    for w in sample_disturbances(model.W, cfg):
        sampled = build_symbolic_image(model, cov, w, cfg, "sampling")
        enclosed = build_symbolic_image(model, cov, w, cfg, "interval")
        assert set(sampled.edges()) <= set(enclosed.edges())


# 10 --------------------------------------------------------------------------

@criterion(10, "Determinism: identical config and seed give byte-identical cell exports")
@pytest.mark.parametrize("sampler", [{}, {"cell_strategy": "random", "cell_samples": 6}], ids=["boundary", "random"])
def test_byte_identical_exports(tmp_path, sampler, capsys):
    cfg = {"system": "example1_linear", "mode": "inner", "N": 10, "seed": 1234, "sampler": sampler}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", str(path), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(path), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "cells.csv").read_bytes()
    b = (tmp_path / "b" / "cells.csv").read_bytes()
    assert len(a.splitlines()) > 1
    assert a == b
