"""Closed-form layer solution for f(u) = sin(pi u) and its embeddings.

u(x) = (2/pi) arctan(pi x) solves the half-Laplacian equation with the sine
nonlinearity; its harmonic extension is (2/pi) arctan(x / (lambda + 1/pi)).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

SHIFT = 1.0 / np.pi


def layer_trace(x):
    return (2.0 / np.pi) * np.arctan(np.pi * np.asarray(x, dtype=float))


def layer_extension(x, lam):
    return (2.0 / np.pi) * np.arctan(x / (lam + SHIFT))


def layer_gradient(x, lam):
    """(d/dx, d/dlambda) of the extension."""
    a = lam + SHIFT
    r2 = x * x + a * a
    return (2.0 / np.pi) * a / r2, -(2.0 / np.pi) * x / r2


def layer_gradient_sup(lam):
    """sup_x |grad v(x, lambda)|, attained at x = 0."""
    return (2.0 / np.pi) / (np.asarray(lam, dtype=float) + SHIFT)


def tilted(direction: Sequence[float], offset: float = 0.0):
    """Extension of u(e . x - offset) as a function of (x_1, ..., x_n, lambda)."""
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)

    def fn(*coords):
        *xs, lam = coords
        xi = sum(ei * xi_ for ei, xi_ in zip(e, xs)) - offset
        return layer_extension(xi, lam)

    return fn


def along_last_axis(n: int):
    """Layer monotone in x_n, embedded in R^n x (0, inf)."""
    e = [0.0] * n
    e[-1] = 1.0
    return tilted(e)
