import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcis import systems
from rcis.dynamics import (
    AffineParts,
    EvaluationError,
    SamplerConfig,
    SingularInputMatrixError,
    SystemModel,
    augment_inputs,
    cancel_disturbance,
    cell_input_samples,
    eval as f_eval,
    eval_interval,
    evaluate_batch,
    parse_expression_system,
    sample_cell,
    sample_cells,
    sample_disturbances,
    sample_inputs,
)
from rcis.geometry import Box


class TestEval:
    def test_example1_origin(self):
        m = systems.example1_linear()
        assert f_eval(m, (0, 0), (0,), (0, 0)).tolist() == [0.0, 0.0]

    def test_example1_matrix_arithmetic(self):
        m = systems.example1_linear()
        assert f_eval(m, (1, 1), (1,), (0, 0)).tolist() == [1.0, 3.0]

    def test_example1_augmented_origin(self):
        m = systems.example1_augmented().to_model()
        assert f_eval(m, (0, 0), (0, 0), (0, 0)).tolist() == [0.0, 0.0]

    def test_shift(self):
        assert f_eval(systems.shift2d(), (-1.5, -1.5), None, None).tolist() == [0.0, 0.0]

    def test_no_inflation_added(self):
        m = systems.shift2d().with_inflation(0.5)
        assert f_eval(m, (0, 0), None, None).tolist() == [1.5, 1.5]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            f_eval(systems.shift2d(), (0, 0, 0), None, None)

    def test_non_finite_names_coordinate(self):
        m = parse_expression_system(["x1", "1/(x1-x1)"], Box.cube(1.0, 2))
        with pytest.raises(EvaluationError) as info:
            f_eval(m, (0.5, 0.5), None, None)
        assert info.value.coordinate == 1
        assert "coordinate 2" in str(info.value)


class TestModelValidation:
    def test_warns_when_w_excludes_origin(self):
        with pytest.warns(UserWarning, match="origin"):
            SystemModel("m", 1, 0, lambda x, u, w: x, Box((0.0,), (1.0,)), W=Box((0.1,), (0.2,)))

    def test_u_required_with_inputs(self):
        with pytest.raises(ValueError):
            SystemModel("m", 1, 1, lambda x, u, w: x, Box((0.0,), (1.0,)))

    def test_negative_inflation(self):
        with pytest.raises(ValueError):
            systems.shift2d().with_inflation(-1.0)


class TestExpressionSystems:
    def test_shift_matches_builtin(self):
        m = parse_expression_system(["x1 + 1.5", "x2 + 1.5"], Box.cube(2.0, 2))
        rng = np.random.default_rng(0)
        x = rng.uniform(-2, 2, (50, 2))
        ref = evaluate_batch(systems.shift2d(), x, np.zeros((50, 0)), np.zeros((50, 2)))
        assert np.array_equal(evaluate_batch(m, x, np.zeros((50, 0)), np.zeros((50, 2))), ref)

    def test_example1_transcription(self):
        m = parse_expression_system(["x2", "x1 + x2 + u1"], Box.cube(5.0, 2), U=Box.cube(2.0, 1))
        ref = systems.example1_linear()
        rng = np.random.default_rng(1)
        x, u = rng.uniform(-5, 5, (30, 2)), rng.uniform(-2, 2, (30, 1))
        w = np.zeros((30, 2))
        assert np.array_equal(evaluate_batch(m, x, u, w), evaluate_batch(ref, x, u, w))

    def test_division_by_zero_parses(self):
        m = parse_expression_system(["x1/(x1-x1)"], Box((0.0,), (1.0,)))
        with pytest.raises(EvaluationError):
            f_eval(m, (0.5,), None, None)

    def test_unknown_identifier_and_dimension(self):
        from rcis.expr import ExpressionError

        with pytest.raises(ExpressionError) as info:
            parse_expression_system(["x1", "x2 + foo"], Box.cube(1.0, 2))
        assert info.value.line == 2
        with pytest.raises(ExpressionError):
            parse_expression_system(["x1 + u2"], Box.cube(1.0, 1), U=Box.cube(1.0, 1))

    def test_parameters(self):
        m = parse_expression_system(["a * x1"], Box.cube(1.0, 1), parameters={"a": 0.5})
        assert f_eval(m, (1.0,), None, None).tolist() == [0.5]


class TestIntervalEvaluation:
    def test_shift(self):
        m = parse_expression_system(["x1 + 1.5", "x2 + 1.5"], Box.cube(2.0, 2))
        b = eval_interval(m, Box((-2, -2), (-1, -1)), None, (0, 0))
        assert np.allclose(b.lo, -0.5) and np.allclose(b.hi, 0.5)
        assert np.all(np.asarray(b.lo) <= -0.5) and np.all(np.asarray(b.hi) >= 0.5)

    def test_naive_square(self):
        m = parse_expression_system(["x1 * x1"], Box.cube(1.0, 1))
        b = eval_interval(m, Box((-1.0,), (1.0,)), None, (0.0,))
        assert b.lo[0] <= -1.0 + 1e-12 and b.hi[0] >= 1.0

    def test_example1_row(self):
        m = parse_expression_system(["x2", "x1 + x2 + u1"], Box.cube(5.0, 2), U=Box.cube(2.0, 1))
        b = eval_interval(m, Box((0, 0), (1, 1)), Box((-2.0,), (2.0,)), (0, 0))
        assert b.lo[1] == pytest.approx(-2.0) and b.hi[1] == pytest.approx(4.0)
        assert b.lo[1] <= -2.0 and b.hi[1] >= 4.0

    def test_soundness_on_random_points(self):
        texts = ["x1 + 0.3 * sin(x2) * u1 + w1", "x2 * x1 - tanh(x1) + exp(0.1 * x2) + w2"]
        m = parse_expression_system(texts, Box.cube(2.0, 2), U=Box.cube(1.0, 1), W=Box.cube(0.1, 2))
        xbox, ubox, w = Box((-0.7, 0.2), (0.4, 1.3)), Box((-0.5,), (0.8,)), (0.1, -0.1)
        enc = eval_interval(m, xbox, ubox, w)
        rng = np.random.default_rng(3)
        x = rng.uniform(xbox.lo, xbox.hi, (1000, 2))
        u = rng.uniform(ubox.lo, ubox.hi, (1000, 1))
        pts = evaluate_batch(m, x, u, np.tile(w, (1000, 1)))
        assert np.all(pts >= np.asarray(enc.lo)) and np.all(pts <= np.asarray(enc.hi))


class TestCancellation:
    def test_example1_v_bounds(self):
        _, rep = cancel_disturbance(systems.example1_augmented())
        assert np.allclose(rep.v_bounds.lo, (-1.7, -0.3), atol=1e-12)
        assert np.allclose(rep.v_bounds.hi, (1.7, 0.3), atol=1e-12)
        assert rep.control == (0,) and rep.disturbance == (1,)
        assert rep.graphs_per_iteration == 2

    def test_identity_transform_when_h_zero(self):
        parts = AffineParts(
            "id", lambda x: [x[0], x[1]], g=np.eye(2), h=np.zeros((2, 2)),
            X=Box.cube(1.0, 2), U=Box.cube(1.0, 2), W=Box.cube(0.2, 2),
        )
        model, rep = cancel_disturbance(parts)
        assert rep.v_bounds == Box.cube(1.0, 2)
        assert model.U == Box.cube(1.0, 2)
        x, u = np.array([[0.3, -0.2]]), np.array([[0.5, 0.1]])
        ref = evaluate_batch(parts.to_model(), x, u, np.zeros((1, 2)))
        assert np.array_equal(evaluate_batch(model, x, u, np.zeros((1, 2))), ref)

    def test_singular_g(self):
        parts = AffineParts(
            "sing", lambda x: [x[0], x[1]], g=np.array([[1.0, 0.0], [0.0, 0.0]]), h=np.eye(2),
            X=Box.cube(1.0, 2), U=Box.cube(1.0, 2), W=Box.cube(0.1, 2),
        )
        with pytest.raises(SingularInputMatrixError, match="augment"):
            cancel_disturbance(parts)

    def test_non_square_g(self):
        with pytest.raises(SingularInputMatrixError):
            cancel_disturbance(systems.example1_parts())

    def test_round_trip_constant_g(self):
        # substituting u = -g^{-1} h w + v into the original map reproduces the transformed map
        parts = systems.example1_augmented()
        model, rep = cancel_disturbance(parts)
        orig = parts.to_model()
        g, h = np.asarray(parts.g), np.asarray(parts.h)
        rng = np.random.default_rng(5)
        x = rng.uniform(-5, 5, (200, 2))
        w = rng.uniform(-0.3, 0.3, (200, 2))
        v = rng.uniform(rep.v_bounds.lo, rep.v_bounds.hi, (200, 2))
        u = -np.linalg.solve(g, h @ w.T).T + v
        resid = np.zeros((200, 2))
        resid[:, 1] = v[:, 1]
        lhs = evaluate_batch(orig, x, u, w)
        rhs = evaluate_batch(model, x, v[:, :1], resid)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12
        assert np.all(np.abs(u[:, 0]) <= 2.0 + 1e-12)

    def test_state_dependent_example2(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            model, rep = cancel_disturbance(augment_inputs(systems.example2_parts(), np.array([[0.0], [1.0]]) * 0.01))
        assert rep.state_dependent and rep.transformed
        assert model.input_bounds is not None
        lo, hi = np.array([[0.0, 0.0]]), np.array([[0.5, 0.5]])
        us, ok = cell_input_samples(model, lo, hi, SamplerConfig())
        assert ok[0] and us.shape == (1, 5, model.m)


class TestAugmentation:
    def test_example1_pattern(self):
        aug = systems.example1_augmented()
        assert np.array_equal(np.asarray(aug.g), [[0.0, 1.0], [1.0, 0.0]])
        assert aug.U == Box((-2.0, 0.0), (2.0, 0.0))

    def test_square_empty_pattern_unchanged(self):
        aug = systems.example1_augmented()
        assert augment_inputs(aug, np.zeros((2, 0))) is aug

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            augment_inputs(systems.example1_parts(), np.eye(2))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_trajectory_equality(self, seed):
        rng = np.random.default_rng(seed)
        base = systems.example1_parts()
        aug = systems.example1_augmented()
        x = rng.uniform(-5, 5, (20, 2))
        u = rng.uniform(-2, 2, (20, 1))
        w = rng.uniform(-0.3, 0.3, (20, 2))
        a = evaluate_batch(base.to_model(), x, u, w)
        b = evaluate_batch(aug.to_model(), x, np.hstack([u, np.zeros((20, 1))]), w)
        assert np.array_equal(a, b)


class TestSamplers:
    def test_center(self):
        pts = sample_cell(Box((0, 0), (1, 1)), SamplerConfig(cell_strategy="center", cell_samples=1))
        assert pts.tolist() == [[0.5, 0.5]]

    def test_boundary_eight(self):
        b = Box((0, 0), (1, 1))
        pts = sample_cell(b, SamplerConfig(cell_strategy="boundary", cell_samples=8))
        assert len(pts) == 8
        assert np.all(np.max(np.abs(pts - 0.5), axis=1) >= 0.5 - 1e-6)
        assert np.all(pts >= 0) and np.all(pts < 1)

    def test_boundary_inside_half_open_cell(self):
        b = Box((-3.0, 2.0), (-2.5, 2.25))
        pts = sample_cell(b, SamplerConfig())
        assert len(pts) == 10
        assert np.all(pts > np.asarray(b.lo)) and np.all(pts < np.asarray(b.hi))

    def test_uniform_1d_lattice(self):
        pts = sample_cell(Box((0.0,), (1.0,)), SamplerConfig(cell_strategy="uniform", cell_samples=4))[:, 0]
        assert np.allclose(pts, np.linspace(0.1, 0.9, 4))
        assert np.all(np.diff(pts) > 0)

    def test_random_reproducible_and_per_cell(self):
        cfg = SamplerConfig(cell_strategy="random", rng_seed=42)
        b = Box((0, 0), (1, 1))
        a1, a2 = sample_cell(b, cfg, key=(3, 1, 2)), sample_cell(b, cfg, key=(3, 1, 2))
        assert a1.tobytes() == a2.tobytes()
        assert not np.array_equal(a1, sample_cell(b, cfg, key=(3, 2, 1)))
        assert not np.array_equal(a1, sample_cell(b, SamplerConfig(cell_strategy="random", rng_seed=43), key=(3, 1, 2)))

    @pytest.mark.parametrize("strategy", ["uniform", "boundary", "center"])
    def test_deterministic_templates(self, strategy):
        cfg = SamplerConfig(cell_strategy=strategy, cell_samples=9)
        lo, hi = np.array([[0.0, 0.0], [1.0, 2.0]]), np.array([[1.0, 1.0], [1.5, 2.5]])
        assert sample_cells(lo, hi, cfg).tobytes() == sample_cells(lo, hi, cfg).tobytes()

    def test_boundary_3d(self):
        pts = sample_cell(Box.cube(1.0, 3), SamplerConfig(cell_samples=10))
        assert len(pts) == 10
        assert np.all(np.max(np.abs(pts), axis=1) >= 1 - 1e-6)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            SamplerConfig(cell_samples=0)
        with pytest.raises(ValueError):
            SamplerConfig(cell_strategy="sobol")

    def test_inputs_lattice(self):
        us = sample_inputs(Box.cube(2.0, 1), SamplerConfig(input_samples=5))
        assert us[:, 0].tolist() == [-2.0, -1.0, 0.0, 1.0, 2.0]
        assert sample_inputs(None, SamplerConfig()).shape == (1, 0)

    @pytest.mark.parametrize("r", [0.3, 0.4])
    def test_disturbance_vertices(self, r):
        ws = sample_disturbances(Box.cube(r, 2), SamplerConfig())
        assert sorted(map(tuple, ws)) == sorted((a, b) for a in (-r, r) for b in (-r, r))

    def test_disturbance_point(self):
        assert sample_disturbances(Box.point((0, 0)), SamplerConfig()).tolist() == [[0.0, 0.0]]

    def test_disturbance_grid_includes_corners(self):
        ws = sample_disturbances(Box.cube(1.0, 2), SamplerConfig(disturbance_mode="grid", disturbance_samples_per_dim=3))
        assert len(ws) == 9
        assert {(-1.0, -1.0), (1.0, 1.0), (0.0, 0.0)} <= set(map(tuple, ws))

    def test_vertex_blowup_rejected(self):
        with pytest.raises(ValueError):
            sample_disturbances(Box.cube(1.0, 21), SamplerConfig())
