"""Quadrature on the reference triangle and on the unit interval.

The reference triangle has vertices (0, 0), (1, 0), (0, 1), so weights sum
to 1/2.  Low degrees use the classical symmetric rules; higher degrees use
collapsed (Duffy) Gauss-Jacobi product rules, which are exact to any order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 20


@dataclass(frozen=True, eq=False)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __len__(self) -> int:
        return len(self.weights)


def _symmetric_rule(degree: int):
    if degree <= 1:
        return np.array([[1 / 3, 1 / 3]]), np.array([0.5])
    if degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return pts, np.full(3, 1 / 6)
    # degree 3..5: 7-point Radon rule
    r = np.sqrt(15.0)
    a1, a2 = (6 - r) / 21, (6 + r) / 21
    w1, w2 = (155 - r) / 2400, (155 + r) / 2400
    pts = np.array(
        [
            [1 / 3, 1 / 3],
            [a1, a1], [1 - 2 * a1, a1], [a1, 1 - 2 * a1],
            [a2, a2], [1 - 2 * a2, a2], [a2, 1 - 2 * a2],
        ]
    )
    return pts, np.array([9 / 80, w1, w1, w1, w2, w2, w2])


def _collapsed_rule(degree: int):
    n = degree // 2 + 1
    # x-direction carries the (1 - s)^1 Jacobian of the Duffy map
    s, ws = roots_jacobi(n, 1.0, 0.0)
    t, wt = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (s + 1.0)
    ws = ws / 4.0
    t = 0.5 * (t + 1.0)
    wt = wt / 2.0
    S, T = np.meshgrid(s, t, indexing="ij")
    x = S.ravel()
    y = ((1.0 - S) * T).ravel()
    w = np.outer(ws, wt).ravel()
    return np.stack([x, y], axis=1), w


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadRule:
    """Rule on the reference triangle exact for polynomials of ``degree``."""
    if int(degree) != degree or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported triangle quadrature degree {degree!r}")
    degree = int(degree)
    if degree <= 5:
        pts, w = _symmetric_rule(degree)
        exact = {1: 1, 2: 2}.get(degree, 5)
    else:
        pts, w = _collapsed_rule(degree)
        exact = 2 * (degree // 2 + 1) - 1
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(pts, w, exact)


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> QuadRule:
    """Gauss-Legendre rule on [0, 1] exact for polynomials of ``degree``."""
    if int(degree) != degree or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported edge quadrature degree {degree!r}")
    n = int(degree) // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    pts = 0.5 * (x + 1.0)
    w = 0.5 * w
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(pts, w, 2 * n - 1)


def triangle_monomial_integral(a: int, b: int) -> float:
    """Closed form of the integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def default_degree(k: int) -> int:
    """Default volume and facet rule degree for velocity order ``k``."""
    return 2 * (k + 1) + 2
