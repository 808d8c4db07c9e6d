"""Oseen coefficient fields and manufactured solutions.

All fields are vectorized callables acting on point arrays of shape
(..., 2).  Gradients follow the convention ``grad_b[..., i, j] = d b_i / d x_j``.
Manufactured solutions are derived symbolically with sympy so that the
body force, its curl, and every derivative of the exact velocity are
available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

Field = Callable[[np.ndarray], np.ndarray]

X, Y = sp.symbols("x y", real=True)


@dataclass(frozen=True, eq=False)
class OseenCoefficients:
    """Data of ``-nu Lap u + (b . grad) u + c u + grad p = f``.

    ``dirichlet`` and ``grad_dirichlet`` give the velocity boundary data and
    its gradient; ``None`` means homogeneous data.
    """

    nu: float
    b: Field
    grad_b: Field
    c: Field
    grad_c: Field
    f: Field
    curl_f: Field | None
    r0: float
    dirichlet: Field | None = None
    grad_dirichlet: Field | None = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got {self.nu}")
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive (c - div b / 2 >= r0 > 0), got {self.r0}")

    def with_force(self, f: Field, curl_f: Field | None) -> "OseenCoefficients":
        return OseenCoefficients(
            self.nu, self.b, self.grad_b, self.c, self.grad_c, f, curl_f, self.r0,
            self.dirichlet, self.grad_dirichlet,
        )


def check_derivatives(coeffs: OseenCoefficients, points: np.ndarray, rtol: float = 1e-5, step: float = 1e-6) -> dict:
    """Central-difference self-check of ``grad_b``, ``grad_c`` and ``curl_f``.

    Returns the relative discrepancy of each supplied derivative.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    ex, ey = np.array([step, 0.0]), np.array([0.0, step])

    def d(fn, e):
        return (np.asarray(fn(pts + e)) - np.asarray(fn(pts - e))) / (2 * step)

    def rel(a, b):
        return float(np.abs(a - b).max() / max(np.abs(b).max(), 1.0))

    out = {
        "grad_b": rel(np.stack([d(coeffs.b, ex), d(coeffs.b, ey)], axis=-1), coeffs.grad_b(pts)),
        "grad_c": rel(np.stack([d(coeffs.c, ex), d(coeffs.c, ey)], axis=-1), coeffs.grad_c(pts)),
    }
    if coeffs.curl_f is not None:
        curl = d(coeffs.f, ex)[:, 1] - d(coeffs.f, ey)[:, 0]
        out["curl_f"] = rel(curl, coeffs.curl_f(pts))
    bad = {k: v for k, v in out.items() if v > rtol}
    if bad:
        raise ValueError(f"coefficient derivatives inconsistent with finite differences: {bad}")
    return out


def _lambdify(expr) -> Field:
    """Vectorized callable for a scalar or nested-list sympy expression."""
    arr = np.array(expr, dtype=object)
    shape = arr.shape
    funcs = [sp.lambdify((X, Y), e, "numpy") for e in arr.ravel()]

    def evaluate(points):
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        vals = [np.broadcast_to(np.asarray(fn(x, y), dtype=float), x.shape) for fn in funcs]
        if not shape:
            return np.array(vals[0])
        return np.stack(vals, axis=-1).reshape(x.shape + shape)

    return evaluate


def _curl_vec(w):
    return sp.diff(w[1], X) - sp.diff(w[0], Y)


@dataclass(eq=False)
class ManufacturedSolution:
    """Exact Oseen solution with induced data, built from sympy expressions."""

    u_expr: tuple
    p_expr: object
    b_expr: tuple
    c_expr: object
    nu: float
    name: str = "manufactured"
    r0: float | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        u, b, c, p = self.u_expr, self.b_expr, self.c_expr, self.p_expr
        nu = sp.nsimplify(self.nu) if isinstance(self.nu, int) else sp.Float(self.nu)
        lap = [sp.diff(ui, X, 2) + sp.diff(ui, Y, 2) for ui in u]
        conv = [b[0] * sp.diff(ui, X) + b[1] * sp.diff(ui, Y) for ui in u]
        self.Lu_expr = tuple(-nu * lap[i] + conv[i] + c * u[i] for i in range(2))
        self.f_expr = tuple(self.Lu_expr[i] + sp.diff(p, s) for i, s in enumerate((X, Y)))
        self.curl_f_expr = _curl_vec(self.f_expr)
        self.curl_Lu_expr = _curl_vec(self.Lu_expr)
        self.div_u_expr = sp.diff(u[0], X) + sp.diff(u[1], Y)
        self.u = _lambdify(list(u))
        self.p = _lambdify(p)
        self.f = _lambdify(list(self.f_expr))
        self.curl_f = _lambdify(self.curl_f_expr)
        self.curl_Lu = _lambdify(self.curl_Lu_expr)
        self.div_u = _lambdify(self.div_u_expr)
        self.b = _lambdify(list(b))
        self.grad_b = _lambdify([[sp.diff(bi, s) for s in (X, Y)] for bi in b])
        self.c = _lambdify(c)
        self.grad_c = _lambdify([sp.diff(c, X), sp.diff(c, Y)])
        self.grad_u = _lambdify([[sp.diff(ui, s) for s in (X, Y)] for ui in u])
        if self.r0 is None:
            self.r0 = _estimate_r0(c - (sp.diff(b[0], X) + sp.diff(b[1], Y)) / 2)

    def u_derivative(self, dx: int, dy: int) -> Field:
        """Callable for ``d^dx/dx d^dy/dy u``, values of shape (..., 2)."""
        key = (dx, dy)
        if key not in self._cache:
            expr = [sp.diff(ui, X, dx, Y, dy) if dx + dy else ui for ui in self.u_expr]
            self._cache[key] = _lambdify(expr)
        return self._cache[key]

    def coefficients(self) -> OseenCoefficients:
        return OseenCoefficients(
            float(self.nu), self.b, self.grad_b, self.c, self.grad_c, self.f, self.curl_f,
            float(self.r0), self.u, self.grad_u,
        )

    def pressure_mean(self) -> float:
        return float(sp.integrate(self.p_expr, (X, 0, 1), (Y, 0, 1)))


def _estimate_r0(expr) -> float:
    fn = _lambdify(expr)
    s = np.linspace(0.0, 1.0, 201)
    pts = np.stack(np.meshgrid(s, s), axis=-1)
    return float(np.min(fn(pts)))


def benchmark_solution(nu: float) -> ManufacturedSolution:
    """Smooth test case on the unit square with ``b = u + (0, 1)`` and ``c = 1``.

    The velocity does not vanish on the boundary, so its trace is imposed as
    Dirichlet data.
    """
    pi = sp.pi
    u = (sp.sin(2 * pi * X) * sp.sin(2 * pi * Y), sp.cos(2 * pi * X) * sp.cos(2 * pi * Y))
    p = (sp.cos(4 * pi * X) - sp.cos(4 * pi * Y)) / 4
    b = (u[0], u[1] + 1)
    return ManufacturedSolution(u, p, b, sp.Integer(1), nu, name="paper-benchmark", r0=1.0)


def polynomial_solution(k: int, nu: float) -> ManufacturedSolution:
    """Divergence-free velocity in P_k^2 with a zero-mean P_{k-1} pressure.

    The velocity is the curl of a fixed stream function of degree k + 1;
    the advection field is affine and divergence-free.
    """
    if k < 2:
        raise ValueError(f"polynomial solution needs k >= 2, got {k}")
    rng = np.random.default_rng(1234 + k)
    psi = sum(
        sp.Rational(int(rng.integers(-9, 10)), 7) * X ** (d - j) * Y ** j
        for d in range(2, k + 2) for j in range(d + 1)
    )
    u = (sp.diff(psi, Y), -sp.diff(psi, X))
    p = sum(
        sp.Rational(int(rng.integers(-9, 10)), 5) * X ** (d - j) * Y ** j
        for d in range(1, k) for j in range(d + 1)
    )
    p = sp.expand(p - sp.integrate(p, (X, 0, 1), (Y, 0, 1)))
    b = (sp.Rational(7, 10) + sp.Rational(3, 10) * Y, -sp.Rational(2, 5) + sp.Rational(1, 5) * X)
    return ManufacturedSolution(u, p, b, sp.Integer(1), nu, name="polynomial-mms", r0=1.0)
