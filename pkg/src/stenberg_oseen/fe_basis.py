"""Dual bases on physical triangles.

Every basis is built directly on the physical element: the degrees of
freedom are applied to a monomial basis written in element-local scaled
coordinates ``xi = (x - center) / scale``, and the resulting DOF matrix is
inverted.  All routines are batched over elements.

Local DOF ordering
------------------
Stenberg (vector, order k)
    vertex values ``(l, c)`` for local vertex l and component c, then edge
    normal moments ``(l, m)`` for ``m <= k - 2``, then interior moments
    against the first-kind Nedelec space of degree ``k - 2``.
Hermite (scalar, degree k + 1)
    ``(value, d/dx, d/dy)`` per local vertex, then edge moments for
    ``m <= k - 3``, then interior moments against scaled monomials of degree
    ``k - 2``.
DG (scalar, degree r)
    L2-orthonormal basis per element; the DOFs are moments against the
    basis itself.

Edge functionals use the facet's global parametrization ``t in [0, 1]``
running from its lower to its higher global vertex, the fixed facet normal,
and shifted Legendre polynomials, normalized by the edge length.  Interior
functionals are normalized by the element area.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

from .quadrature import edge_rule, triangle_rule


class BasisError(RuntimeError):
    """Raised when a DOF matrix is singular or badly conditioned."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


COND_LIMIT = 1e12


@dataclass(frozen=True)
class DofSpec:
    kind: str
    entity: int
    sub: int


# -- monomials ------------------------------------------------------------

@lru_cache(maxsize=None)
def monomial_exponents(p: int) -> tuple[tuple[int, int], ...]:
    """Exponents ``(a, b)`` of x^a y^b, ordered by total degree."""
    return tuple((d - j, j) for d in range(p + 1) for j in range(d + 1))


def dim_poly(p: int) -> int:
    return 0 if p < 0 else (p + 1) * (p + 2) // 2


def _falling(n: int, r: int) -> int:
    out = 1
    for i in range(r):
        out *= n - i
    return out


def scaled_monomials(xi: np.ndarray, eta: np.ndarray, p: int, dx: int = 0, dy: int = 0) -> np.ndarray:
    """Derivative ``d^dx/dxi d^dy/deta`` of all monomials of degree <= p.

    Returns an array of shape ``xi.shape + (dim_poly(p),)``.
    """
    exps = monomial_exponents(p)
    out = np.zeros(xi.shape + (len(exps),))
    xp = [np.ones_like(xi)]
    yp = [np.ones_like(eta)]
    for _ in range(p):
        xp.append(xp[-1] * xi)
        yp.append(yp[-1] * eta)
    for m, (a, b) in enumerate(exps):
        if a >= dx and b >= dy:
            out[..., m] = (_falling(a, dx) * _falling(b, dy)) * xp[a - dx] * yp[b - dy]
    return out


@dataclass(frozen=True, eq=False)
class ElementFrame:
    """Per-element affine frame for the scaled monomial basis."""

    center: np.ndarray  # (nt, 2)
    scale: np.ndarray   # (nt,)

    @classmethod
    def from_vertices(cls, tri: np.ndarray) -> "ElementFrame":
        lo, hi = tri.min(axis=1), tri.max(axis=1)
        return cls(0.5 * (lo + hi), 0.5 * (hi - lo).max(axis=1))

    def local(self, points: np.ndarray, elements=None):
        c = self.center if elements is None else self.center[elements]
        s = self.scale if elements is None else self.scale[elements]
        shape = (-1,) + (1,) * (points.ndim - 2)
        xi = (points[..., 0] - c[:, 0].reshape(shape)) / s.reshape(shape)
        eta = (points[..., 1] - c[:, 1].reshape(shape)) / s.reshape(shape)
        return xi, eta, s.reshape(shape)

    def monomials(self, points, p, dx=0, dy=0, elements=None):
        """Physical-coordinate derivatives of scaled monomials, (n, npts, nmono)."""
        xi, eta, s = self.local(points, elements)
        out = scaled_monomials(xi, eta, p, dx, dy)
        if dx + dy:
            out /= (s ** (dx + dy))[..., None]
        return out


def legendre01(m: int, t: np.ndarray) -> np.ndarray:
    """Shifted Legendre polynomial of degree m on [0, 1]."""
    c = np.zeros(m + 1)
    c[m] = 1.0
    return legendre.legval(2.0 * t - 1.0, c)


# -- Nedelec space ---------------------------------------------------------

@lru_cache(maxsize=None)
def nedelec_coefficients(r: int) -> np.ndarray:
    """Monomial coefficients of a basis of the first-kind Nedelec space N_r.

    ``N_r = {a + b * (-y, x) : a in P_r^2, b homogeneous of degree r}``.
    Returns shape ``(dim, 2, dim_poly(r + 1))`` so that basis function i has
    component c equal to ``sum_m out[i, c, m] * x^a_m y^b_m``.
    """
    if r < 0:
        raise ValueError(f"Nedelec degree must be >= 0, got {r}")
    exps = monomial_exponents(r + 1)
    index = {e: m for m, e in enumerate(exps)}
    rows = []
    for c in range(2):
        for a, b in monomial_exponents(r):
            row = np.zeros((2, len(exps)))
            row[c, index[(a, b)]] = 1.0
            rows.append(row)
    for j in range(r + 1):
        a, b = r - j, j
        row = np.zeros((2, len(exps)))
        row[0, index[(a, b + 1)]] = -1.0
        row[1, index[(a + 1, b)]] = 1.0
        rows.append(row)
    out = np.array(rows)
    out.setflags(write=False)
    return out


def nedelec_dim(r: int) -> int:
    return (r + 1) * (r + 3)


def nedelec_space(frame: ElementFrame, r: int) -> Callable[[np.ndarray], np.ndarray]:
    """Evaluator of the N_r basis in the element's scaled coordinates.

    The returned callable maps points of shape (nt, npts, 2) to values of
    shape (nt, npts, dim, 2).
    """
    coef = nedelec_coefficients(r)

    def evaluate(points, elements=None):
        xi, eta, _ = frame.local(points, elements)
        mono = scaled_monomials(xi, eta, r + 1)
        return np.einsum("eqm,icm->eqic", mono, coef)

    return evaluate


# -- batched element bases -------------------------------------------------

@dataclass(frozen=True, eq=False)
class ElementBasis:
    """Dual bases of one finite element on a batch of triangles.

    ``coeffs[e, c, m, j]`` is the coefficient of scaled monomial ``m`` in
    component ``c`` of local basis function ``j`` on element ``e``.
    """

    kind: str
    degree: int
    frame: ElementFrame
    coeffs: np.ndarray
    dofs: tuple[DofSpec, ...]
    condition: np.ndarray

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[1]

    @property
    def nloc(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def nelem(self) -> int:
        return self.coeffs.shape[0]

    def evaluate(self, points: np.ndarray, dx: int = 0, dy: int = 0, elements=None) -> np.ndarray:
        """Derivative ``d^dx/dx d^dy/dy`` of all local basis functions.

        ``points`` has shape (n, npts, 2) where n matches ``elements`` (or all
        elements).  Returns (n, npts, nloc) for scalar and (n, npts, nloc, 2)
        for vector elements.
        """
        mono = self.frame.monomials(points, self.degree, dx, dy, elements)
        coeffs = self.coeffs if elements is None else self.coeffs[elements]
        if self.ncomp == 1:
            return np.einsum("eqm,emj->eqj", mono, coeffs[:, 0])
        return np.einsum("eqm,ecmj->eqjc", mono, coeffs)

    def derivatives(self, points: np.ndarray, order: int, elements=None) -> dict:
        """All partial derivatives up to total ``order`` keyed by ``(dx, dy)``."""
        return {
            (i, d - i): self.evaluate(points, i, d - i, elements)
            for d in range(order + 1)
            for i in range(d, -1, -1)
        }

    def curl(self, points: np.ndarray, elements=None) -> np.ndarray:
        """Curl of the basis: ``(d/dy z, -d/dx z)`` for scalar elements and
        ``d/dx w2 - d/dy w1`` for vector elements."""
        if self.ncomp == 1:
            return np.stack(
                [self.evaluate(points, 0, 1, elements), -self.evaluate(points, 1, 0, elements)],
                axis=-1,
            )
        gx = self.evaluate(points, 1, 0, elements)
        gy = self.evaluate(points, 0, 1, elements)
        return gx[..., 1] - gy[..., 0]

    def element(self, e: int) -> "ElementBasis":
        """The basis restricted to a single element."""
        sl = slice(e, e + 1)
        return ElementBasis(
            self.kind, self.degree, ElementFrame(self.frame.center[sl], self.frame.scale[sl]),
            self.coeffs[sl], self.dofs, self.condition[sl],
        )


def _check_condition(cond: np.ndarray, kind: str) -> None:
    bad = ~np.isfinite(cond) | (cond > COND_LIMIT)
    if np.any(bad):
        worst = float(np.nan_to_num(cond, nan=np.inf)[bad].max())
        raise BasisError(f"singular {kind} DOF matrix on element {int(np.flatnonzero(bad)[0])}", worst)


def _invert(M: np.ndarray, kind: str):
    cond = np.linalg.cond(M)
    _check_condition(cond, kind)
    return np.linalg.inv(M), cond


# -- DOF functionals -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EdgeData:
    """Global orientation of the three local edges of each element.

    ``start``/``end`` are the endpoints ordered by global vertex index and
    ``normal`` the fixed facet normal, all of shape (nt, 3, 2).
    """

    start: np.ndarray
    end: np.ndarray
    normal: np.ndarray

    @classmethod
    def from_mesh(cls, mesh) -> "EdgeData":
        f = mesh.element_facets
        p = mesh.vertices
        return cls(p[mesh.facets[f, 0]], p[mesh.facets[f, 1]], mesh.facet_normals[f])

    @classmethod
    def local(cls, tri: np.ndarray) -> "EdgeData":
        """Orientation from the local vertex order with outward normals."""
        start = np.stack([tri[:, 1], tri[:, 2], tri[:, 0]], axis=1)
        end = np.stack([tri[:, 2], tri[:, 0], tri[:, 1]], axis=1)
        d = end - start
        normal = np.stack([d[..., 1], -d[..., 0]], axis=-1)
        normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
        return cls(start, end, normal)

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.end - self.start, axis=-1)


def _edge_points(edges: EdgeData, t: np.ndarray) -> np.ndarray:
    """Points on every local edge, shape (nt, 3 * nq, 2)."""
    pts = edges.start[:, :, None, :] + t[None, None, :, None] * (edges.end - edges.start)[:, :, None, :]
    return pts.reshape(len(pts), -1, 2)


def _volume_points(tri: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Map reference points (nq, 2) to every element, (nt, nq, 2)."""
    v0 = tri[:, 0]
    J = np.stack([tri[:, 1] - v0, tri[:, 2] - v0], axis=-1)  # columns are edge vectors
    return v0[:, None, :] + np.einsum("eij,qj->eqi", J, ref)


class StenbergFunctionals:
    """DOF functionals of the Stenberg element of order k on a batch of triangles."""

    def __init__(self, tri: np.ndarray, k: int, edges: EdgeData, frame: ElementFrame, quad_degree: int | None = None):
        if k < 2:
            raise ValueError(f"Stenberg element requires k >= 2, got {k}")
        self.tri, self.k, self.edges, self.frame = tri, k, edges, frame
        qd = quad_degree or 2 * k + 4
        er = edge_rule(qd)
        self.edge_t = er.points
        # (nq, m) weights w_q L_m(t_q); the 1/|e| normalization cancels ds = |e| dt
        self.edge_w = np.stack([er.weights * legendre01(m, er.points) for m in range(k - 1)], axis=1)
        vr = triangle_rule(qd)
        self.vol_pts = _volume_points(tri, vr.points)
        self.vol_w = 2.0 * vr.weights  # normalized by |K|
        self.psi = nedelec_space(frame, k - 2)(self.vol_pts) if k >= 2 else None
        self.edge_pts = _edge_points(edges, self.edge_t)

    @property
    def ndof(self) -> int:
        k = self.k
        return 6 + 3 * (k - 1) + nedelec_dim(k - 2)

    def dof_specs(self) -> tuple[DofSpec, ...]:
        k = self.k
        out = [DofSpec("vertex-value-component", l, c) for l in range(3) for c in range(2)]
        out += [DofSpec("edge-normal-moment", l, m) for l in range(3) for m in range(k - 1)]
        out += [DofSpec("interior-nedelec-moment", 0, i) for i in range(nedelec_dim(k - 2))]
        return tuple(out)

    def apply(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Apply all DOFs to ``func``.

        ``func`` maps points (nt, npts, 2) to values (nt, npts, X, 2); the
        result has shape (nt, ndof, X).
        """
        nt = len(self.tri)
        vv = func(self.tri)  # (nt, 3, X, 2)
        vertex = vv.transpose(0, 1, 3, 2).reshape(nt, 6, -1)
        ev = func(self.edge_pts)
        X = ev.shape[2]
        ev = ev.reshape(nt, 3, len(self.edge_t), X, 2)
        vn = np.einsum("elqxc,elc->elqx", ev, self.edges.normal)
        edge = np.einsum("elqx,qm->elmx", vn, self.edge_w).reshape(nt, -1, X)
        iv = func(self.vol_pts)
        interior = np.einsum("q,eqic,eqxc->eix", self.vol_w, self.psi, iv)
        return np.concatenate([vertex, edge, interior], axis=1)


class HermiteFunctionals:
    """DOF functionals of the Hermite element of degree k + 1."""

    def __init__(self, tri: np.ndarray, k: int, edges: EdgeData, frame: ElementFrame, quad_degree: int | None = None):
        if k < 2:
            raise ValueError(f"Hermite element requires degree k + 1 >= 3, got k={k}")
        self.tri, self.k, self.edges, self.frame = tri, k, edges, frame
        qd = quad_degree or 2 * k + 4
        er = edge_rule(qd)
        self.edge_t = er.points
        self.n_edge = max(k - 2, 0)
        self.edge_w = np.stack([er.weights * legendre01(m, er.points) for m in range(self.n_edge)], axis=1) if self.n_edge else None
        vr = triangle_rule(qd)
        self.vol_pts = _volume_points(tri, vr.points)
        self.vol_w = 2.0 * vr.weights
        self.q = frame.monomials(self.vol_pts, k - 2)
        self.edge_pts = _edge_points(edges, self.edge_t)

    @property
    def ndof(self) -> int:
        return 9 + 3 * self.n_edge + dim_poly(self.k - 2)

    def dof_specs(self) -> tuple[DofSpec, ...]:
        out = []
        for l in range(3):
            out.append(DofSpec("hermite-vertex-value", l, 0))
            out.append(DofSpec("hermite-vertex-derivative", l, 0))
            out.append(DofSpec("hermite-vertex-derivative", l, 1))
        out += [DofSpec("hermite-edge-moment", l, m) for l in range(3) for m in range(self.n_edge)]
        out += [DofSpec("hermite-interior-moment", 0, i) for i in range(dim_poly(self.k - 2))]
        return tuple(out)

    def apply(self, func: Callable[[np.ndarray, int, int], np.ndarray]) -> np.ndarray:
        """``func(points, dx, dy)`` returns (nt, npts, X); result (nt, ndof, X)."""
        nt = len(self.tri)
        vertex = np.stack(
            [func(self.tri, 0, 0), func(self.tri, 1, 0), func(self.tri, 0, 1)], axis=2
        )  # (nt, 3, 3, X)
        X = vertex.shape[-1]
        parts = [vertex.reshape(nt, 9, X)]
        if self.n_edge:
            ev = func(self.edge_pts, 0, 0).reshape(nt, 3, len(self.edge_t), X)
            parts.append(np.einsum("elqx,qm->elmx", ev, self.edge_w).reshape(nt, -1, X))
        iv = func(self.vol_pts, 0, 0)
        parts.append(np.einsum("q,eqi,eqx->eix", self.vol_w, self.q, iv))
        return np.concatenate(parts, axis=1)


def _vector_monomial_evaluator(frame: ElementFrame, p: int):
    def evaluate(points):
        mono = frame.monomials(points, p)
        n = mono.shape[-1]
        out = np.zeros(mono.shape[:2] + (2 * n, 2))
        out[:, :, :n, 0] = mono
        out[:, :, n:, 1] = mono
        return out

    return evaluate


def stenberg_basis(tri: np.ndarray, k: int, edges: EdgeData | None = None) -> ElementBasis:
    """Dual basis of the Stenberg element of order ``k`` (P_k^2, k >= 2)."""
    tri = np.asarray(tri, dtype=float)
    edges = EdgeData.local(tri) if edges is None else edges
    frame = ElementFrame.from_vertices(tri)
    fun = StenbergFunctionals(tri, k, edges, frame)
    M = fun.apply(_vector_monomial_evaluator(frame, k))
    C, cond = _invert(M, "Stenberg")
    nmono = dim_poly(k)
    coeffs = C.reshape(len(tri), 2, nmono, -1)
    return ElementBasis("stenberg", k, frame, coeffs, fun.dof_specs(), cond)


def hermite_basis(tri: np.ndarray, degree: int, edges: EdgeData | None = None) -> ElementBasis:
    """Dual basis of the Hermite element of polynomial ``degree`` (>= 3)."""
    if degree < 3:
        raise ValueError(f"Hermite element requires degree >= 3, got {degree}")
    tri = np.asarray(tri, dtype=float)
    edges = EdgeData.local(tri) if edges is None else edges
    frame = ElementFrame.from_vertices(tri)
    fun = HermiteFunctionals(tri, degree - 1, edges, frame)
    M = fun.apply(lambda pts, dx, dy: frame.monomials(pts, degree, dx, dy))
    # balance derivative rows by the element scale so conditioning is h-independent
    row = np.ones(M.shape[:2])
    row[:, [1, 2, 4, 5, 7, 8]] = frame.scale[:, None]
    C, cond = _invert(M * row[:, :, None], "Hermite")
    C = C * row[:, None, :]
    return ElementBasis("hermite", degree, frame, C[:, None], fun.dof_specs(), cond)


def dg_basis(tri: np.ndarray, degree: int) -> ElementBasis:
    """L2-orthonormal basis of P_degree on each element."""
    if degree < 0:
        raise ValueError(f"DG degree must be >= 0, got {degree}")
    tri = np.asarray(tri, dtype=float)
    frame = ElementFrame.from_vertices(tri)
    vr = triangle_rule(max(2 * degree, 1))
    pts = _volume_points(tri, vr.points)
    area = 0.5 * np.abs(
        (tri[:, 1, 0] - tri[:, 0, 0]) * (tri[:, 2, 1] - tri[:, 0, 1])
        - (tri[:, 1, 1] - tri[:, 0, 1]) * (tri[:, 2, 0] - tri[:, 0, 0])
    )
    P = frame.monomials(pts, degree)
    gram = np.einsum("q,eqi,eqj->eij", 2.0 * vr.weights, P, P) * area[:, None, None]
    cond = np.linalg.cond(gram)
    _check_condition(cond, "DG")
    L = np.linalg.cholesky(gram)
    eye = np.broadcast_to(np.eye(gram.shape[-1]), gram.shape)
    coeffs = np.linalg.solve(L, eye).transpose(0, 2, 1)  # L^{-T}
    dofs = tuple(DofSpec("pressure-moment", 0, i) for i in range(dim_poly(degree)))
    return ElementBasis("dg", degree, frame, coeffs[:, None], dofs, cond)
