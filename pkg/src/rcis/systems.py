"""Built-in systems used by the examples, tests and the CLI."""

from __future__ import annotations

import math

import numpy as np

from rcis.dynamics import AffineParts, SystemModel, augment_inputs, cancel_disturbance
from rcis.geometry import Box

EXAMPLE1_A = np.array([[0.0, 1.0], [1.0, 1.0]])
EXAMPLE1_B = np.array([[0.0], [1.0]])
EXAMPLE1_G = np.eye(2)
EXAMPLE1_AUGMENT = np.array([[1.0], [0.0]])


def example1_parts(w_radius: float = 0.3) -> AffineParts:
    """Planar linear system ``x+ = A x + B u + G w``, ``|x| <= 5``, ``|u| <= 2``."""
    A = EXAMPLE1_A

    def drift(x):
        return [A[0, 0] * x[0] + A[0, 1] * x[1], A[1, 0] * x[0] + A[1, 1] * x[1]]

    return AffineParts(
        "example1",
        drift,
        g=EXAMPLE1_B,
        h=EXAMPLE1_G,
        X=Box.cube(5.0, 2),
        U=Box.cube(2.0, 1),
        W=Box.cube(w_radius, 2),
    )


def example1_linear(w_radius: float = 0.3) -> SystemModel:
    return example1_parts(w_radius).to_model("example1_linear")


def example1_augmented(w_radius: float = 0.3) -> AffineParts:
    return augment_inputs(example1_parts(w_radius), EXAMPLE1_AUGMENT)


def example1_transformed(w_radius: float = 0.3) -> SystemModel:
    model, _ = cancel_disturbance(example1_augmented(w_radius))
    return model


def example2_parts(T: float = 0.01, mu: float = 0.9, w_radius: float = 0.4) -> AffineParts:
    """Planar nonlinear system with state-dependent input gain, ``|x| <= 4``, ``|u| <= 2``."""

    def drift(x):
        return [x[0] + T * x[1], T * x[0] + x[1]]

    def g(x):
        return [[T * (mu + (1 - mu) * x[0])], [T * (mu - 4 * (1 - mu) * x[1])]]

    return AffineParts(
        "example2",
        drift,
        g=g,
        h=T * np.eye(2),
        X=Box.cube(4.0, 2),
        U=Box.cube(2.0, 1),
        W=Box.cube(w_radius, 2),
    )


def example2_nonlinear(T: float = 0.01, mu: float = 0.9, w_radius: float = 0.4) -> SystemModel:
    return example2_parts(T, mu, w_radius).to_model("example2_nonlinear")


def shift2d(offset: float = 1.5) -> SystemModel:
    """``x+ = x + offset`` on ``|x| <= 2``: every trajectory leaves."""

    def f(x, u, w):
        return [x[0] + offset, x[1] + offset]

    return SystemModel("shift2d", 2, 0, f, Box.cube(2.0, 2))


def rotation2d(angle: float = 1.0, radius: float = 5.0) -> SystemModel:
    """Rigid rotation; the largest invariant subset of the square is the inscribed disc."""
    c, s = math.cos(angle), math.sin(angle)

    def f(x, u, w):
        return [c * x[0] - s * x[1], s * x[0] + c * x[1]]

    return SystemModel("rotation2d", 2, 0, f, Box.cube(radius, 2))


def identity(n: int = 2, radius: float = 1.0) -> SystemModel:
    def f(x, u, w):
        return [x[i] * 1.0 for i in range(n)]

    return SystemModel("identity", n, 0, f, Box.cube(radius, n))


BUILTINS = {
    "example1_linear": example1_linear,
    "example1_transformed": example1_transformed,
    "example2_nonlinear": example2_nonlinear,
    "shift2d": shift2d,
    "rotation2d": rotation2d,
    "identity": identity,
}


def builtin(name: str, **params) -> SystemModel:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin system {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)
