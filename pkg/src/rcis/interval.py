"""Vectorised interval arithmetic with outward rounding.

An :class:`Interval` holds numpy arrays ``lo`` and ``hi`` of a common
(broadcast) shape, so one object can carry the enclosures of a whole batch
of cells. Every operation rounds its result outward by one ulp, which keeps
enclosures sound under floating-point evaluation.

The module-level functions (:func:`sin`, :func:`exp`, ...) dispatch on their
argument: plain floats and arrays go to numpy, intervals to the interval
rule. Dynamics written with them evaluate in both modes.
"""

from __future__ import annotations

import math

import numpy as np


class IntervalError(ArithmeticError):
    """An interval operation has no sound finite result (e.g. division by an interval containing 0)."""


def _down(x):
    return np.nextafter(x, -np.inf)


def _up(x):
    return np.nextafter(x, np.inf)


class Interval:
    __slots__ = ("lo", "hi")
    __array_priority__ = 1000

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=float)
        hi = lo if hi is None else np.asarray(hi, dtype=float)
        lo, hi = np.broadcast_arrays(lo, hi)
        if np.any(lo > hi):
            raise ValueError("interval with lo > hi")
        self.lo = lo
        self.hi = hi

    @staticmethod
    def _rounded(lo, hi) -> "Interval":
        return Interval(_down(lo), _up(hi))

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    def __repr__(self):
        if self.lo.ndim == 0:
            return f"Interval({float(self.lo)!r}, {float(self.hi)!r})"
        return f"Interval(lo={self.lo!r}, hi={self.hi!r})"

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (self.lo <= x) & (x <= self.hi)

    def contains_zero(self) -> np.ndarray:
        return (self.lo <= 0.0) & (self.hi >= 0.0)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        o = as_interval(other)
        return Interval._rounded(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __sub__(self, other):
        o = as_interval(other)
        return Interval._rounded(self.lo - o.hi, self.hi - o.lo)

    def __rsub__(self, other):
        return as_interval(other) - self

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __mul__(self, other):
        o = as_interval(other)
        p = np.stack(np.broadcast_arrays(self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi))
        # 0 * inf products only arise from unbounded operands
        p = np.where(np.isnan(p), 0.0, p)
        return Interval._rounded(p.min(axis=0), p.max(axis=0))

    __rmul__ = __mul__

    def reciprocal(self):
        if np.any(self.contains_zero()):
            raise IntervalError("interval division by an interval containing 0")
        return Interval._rounded(1.0 / self.hi, 1.0 / self.lo)

    def __truediv__(self, other):
        return self * as_interval(other).reciprocal()

    def __rtruediv__(self, other):
        return as_interval(other) * self.reciprocal()

    def square(self):
        a, b = np.abs(self.lo), np.abs(self.hi)
        lo = np.where(self.contains_zero(), 0.0, np.minimum(a, b) ** 2)
        hi = np.maximum(a, b) ** 2
        return Interval(np.maximum(_down(lo), 0.0), _up(hi))

    def __pow__(self, other):
        o = as_interval(other)
        if np.all(o.lo == o.hi):
            e = o.lo
            if np.all(e == np.round(e)):
                return _int_power(self, e.astype(np.int64))
            if np.any(self.lo < 0):
                raise IntervalError("non-integer power of an interval with negative values")
            # monotone in the base for a fixed exponent sign
            lo = np.where(e >= 0, self.lo ** e, self.hi ** e)
            hi = np.where(e >= 0, self.hi ** e, self.lo ** e)
            if np.any((e < 0) & (self.lo == 0)):
                raise IntervalError("negative power of an interval containing 0")
            return Interval._rounded(lo, hi)
        if np.any(self.lo <= 0):
            raise IntervalError("power with interval exponent requires a positive base")
        return exp(o * log(self))

    def __rpow__(self, other):
        return as_interval(other) ** self

    # set operations -------------------------------------------------------
    def hull(self, other):
        o = as_interval(other)
        return Interval(np.minimum(self.lo, o.lo), np.maximum(self.hi, o.hi))


def as_interval(x) -> Interval:
    return x if isinstance(x, Interval) else Interval(x)


def _int_power(x: Interval, e: np.ndarray) -> Interval:
    if np.ndim(e) != 0:
        if np.unique(e).size != 1:
            raise IntervalError("integer powers must share one exponent")
        e = np.ravel(e)[0]
    e = int(e)
    if e == 0:
        return Interval(np.ones_like(x.lo))
    if e < 0:
        return _int_power(x, np.int64(-e)).reciprocal()
    a = x.lo ** e
    b = x.hi ** e
    if e % 2:
        return Interval._rounded(a, b)
    lo = np.where(x.lo >= 0, a, np.where(x.hi <= 0, b, 0.0))
    hi = np.maximum(a, b)
    return Interval(np.maximum(_down(lo), 0.0), _up(hi))


# elementary functions ------------------------------------------------------

def _monotone(fn, x: Interval) -> Interval:
    with np.errstate(all="ignore"):
        return Interval._rounded(fn(x.lo), fn(x.hi))


def exp(x):
    if isinstance(x, Interval):
        return _monotone(np.exp, x)
    return np.exp(x)


def log(x):
    if isinstance(x, Interval):
        if np.any(x.lo <= 0):
            raise IntervalError("log of an interval reaching 0 or below")
        return _monotone(np.log, x)
    return np.log(x)


def tanh(x):
    if isinstance(x, Interval):
        r = _monotone(np.tanh, x)
        return Interval(np.maximum(r.lo, -1.0), np.minimum(r.hi, 1.0))
    return np.tanh(x)


def sqrt(x):
    if isinstance(x, Interval):
        if np.any(x.lo < 0):
            raise IntervalError("sqrt of an interval with negative values")
        r = _monotone(np.sqrt, x)
        return Interval(np.maximum(r.lo, 0.0), r.hi)
    return np.sqrt(x)


def fabs(x):
    if isinstance(x, Interval):
        a, b = np.abs(x.lo), np.abs(x.hi)
        lo = np.where(x.contains_zero(), 0.0, np.minimum(a, b))
        return Interval(lo, np.maximum(a, b))
    return np.abs(x)


def minimum(x, y):
    if isinstance(x, Interval) or isinstance(y, Interval):
        a, b = as_interval(x), as_interval(y)
        return Interval(np.minimum(a.lo, b.lo), np.minimum(a.hi, b.hi))
    return np.minimum(x, y)


def maximum(x, y):
    if isinstance(x, Interval) or isinstance(y, Interval):
        a, b = as_interval(x), as_interval(y)
        return Interval(np.maximum(a.lo, b.lo), np.maximum(a.hi, b.hi))
    return np.maximum(x, y)


def sin(x):
    if isinstance(x, Interval):
        return cos(x - math.pi / 2)
    return np.sin(x)


def cos(x):
    if not isinstance(x, Interval):
        return np.cos(x)
    lo, hi = x.lo, x.hi
    # extrema of cos sit at integer multiples of pi: maxima at even ones
    k = np.ceil(lo / math.pi)
    k_even = np.where(np.mod(k, 2) == 0, k, k + 1)
    k_odd = np.where(np.mod(k, 2) == 1, k, k + 1)
    wide = (hi - lo) >= 2 * math.pi
    has_max = wide | (k_even * math.pi <= hi)
    has_min = wide | (k_odd * math.pi <= hi)
    c_lo, c_hi = np.cos(lo), np.cos(hi)
    out_lo = np.where(has_min, -1.0, _down(np.minimum(c_lo, c_hi)))
    out_hi = np.where(has_max, 1.0, _up(np.maximum(c_lo, c_hi)))
    return Interval(np.maximum(out_lo, -1.0), np.minimum(out_hi, 1.0))
