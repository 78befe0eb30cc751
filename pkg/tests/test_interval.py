import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcis import interval as iv
from rcis.interval import Interval, IntervalError

finite = st.floats(-50, 50, allow_nan=False)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return Interval(min(a, b), max(a, b))


def _inside(iv_, x):
    return bool(np.all(iv_.lo <= x) and np.all(x <= iv_.hi))


def _points(i: Interval, k=9):
    return np.linspace(float(i.lo), float(i.hi), k)


def test_naive_square_overestimates():
    x = Interval(-1.0, 1.0)
    r = x * x
    assert r.lo <= -1.0 and r.hi >= 1.0
    assert r.lo > -1.0 - 1e-12


def test_square_is_tight():
    r = Interval(-1.0, 1.0).square()
    assert r.lo == 0.0 and 1.0 <= r.hi < 1.0 + 1e-12


def test_outward_rounding():
    r = Interval(0.1) + Interval(0.2)
    assert r.lo < 0.1 + 0.2 < r.hi or r.lo <= 0.30000000000000004 <= r.hi


def test_division_by_zero_interval():
    with pytest.raises(IntervalError):
        Interval(1.0, 2.0) / Interval(-1.0, 1.0)


def test_vectorised_shapes():
    x = Interval(np.array([0.0, 1.0]), np.array([1.0, 3.0]))
    y = x * 2.0 - 1.0
    assert y.lo.shape == (2,)
    assert y.lo[1] <= 1.0 and y.hi[1] >= 5.0


def test_negative_integer_power():
    r = Interval(2.0, 4.0) ** -1
    assert r.lo <= 0.25 and r.hi >= 0.5


def test_even_power_straddling_zero():
    r = Interval(-2.0, 1.0) ** 2
    assert r.lo == 0.0 and r.hi >= 4.0


@settings(max_examples=200, deadline=None)
@given(intervals(), intervals())
def test_arithmetic_encloses(a, b):
    xs, ys = _points(a), _points(b)
    X, Y = np.meshgrid(xs, ys)
    assert _inside(a + b, X + Y)
    assert _inside(a - b, X - Y)
    assert _inside(a * b, X * Y)
    if not b.contains_zero():
        assert _inside(a / b, X / Y)


@settings(max_examples=200, deadline=None)
@given(intervals())
def test_functions_enclose(a):
    xs = _points(a, 50)
    assert _inside(iv.sin(a), np.sin(xs))
    assert _inside(iv.cos(a), np.cos(xs))
    assert _inside(iv.tanh(a), np.tanh(xs))
    assert _inside(iv.fabs(a), np.abs(xs))
    assert _inside(a ** 3, xs ** 3)
    assert _inside(a ** 2, xs ** 2)
    if a.hi < 30:
        assert _inside(iv.exp(a), np.exp(xs))
    if a.lo >= 0:
        assert _inside(iv.sqrt(a), np.sqrt(xs))


def test_cos_hits_extrema():
    r = iv.cos(Interval(-0.1, 0.1))
    assert r.hi == 1.0
    r = iv.cos(Interval(3.0, 3.3))
    assert r.lo == -1.0
    r = iv.sin(Interval(0.0, 7.0))
    assert r.lo == -1.0 and r.hi == 1.0


def test_min_max():
    a, b = Interval(0.0, 2.0), Interval(1.0, 3.0)
    assert (iv.minimum(a, b).lo, iv.minimum(a, b).hi) == (0.0, 2.0)
    assert (iv.maximum(a, b).lo, iv.maximum(a, b).hi) == (1.0, 3.0)


def test_float_dispatch():
    assert iv.sin(0.5) == math.sin(0.5)
    assert np.allclose(iv.fabs(np.array([-1.0, 2.0])), [1.0, 2.0])


def test_domain_errors():
    with pytest.raises(IntervalError):
        iv.sqrt(Interval(-1.0, 1.0))
    with pytest.raises(IntervalError):
        iv.log(Interval(0.0, 1.0))
