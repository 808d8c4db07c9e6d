"""Global DOF numbering for the velocity, pressure and potential spaces.

Global numbering is blocked by entity: vertex DOFs first, then edge DOFs,
then element-interior DOFs.  Shared entities receive one global index, so
the edge normal moments and vertex values of neighbouring elements coincide
by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fe_basis import (
    EdgeData,
    ElementBasis,
    HermiteFunctionals,
    StenbergFunctionals,
    dg_basis,
    dim_poly,
    hermite_basis,
    nedelec_dim,
    stenberg_basis,
    _volume_points,
)
from .mesh import Mesh
from .quadrature import default_degree, triangle_rule


@dataclass(frozen=True, eq=False)
class FeSpace:
    """A global finite element space on a mesh.

    Attributes
    ----------
    tag : {"velocity", "pressure", "potential"}
    order : polynomial degree of the local space
    element_dofs : (nt, nloc) global index of each local DOF
    constrained : sorted global indices fixed by strong boundary conditions
    offsets : start of the vertex, edge and element blocks
    """

    tag: str
    order: int
    mesh: Mesh
    basis: ElementBasis
    element_dofs: np.ndarray
    ndof: int
    offsets: dict
    constrained: np.ndarray
    functionals: object = None

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.ndof, dtype=bool)
        mask[self.constrained] = False
        return np.flatnonzero(mask)

    @property
    def n_free(self) -> int:
        return self.ndof - len(self.constrained)

    def local(self, coeffs: np.ndarray) -> np.ndarray:
        """Element-local coefficient blocks, shape (nt, nloc)."""
        return np.asarray(coeffs)[self.element_dofs]

    def embed(self, free_values: np.ndarray, constrained_values=None) -> np.ndarray:
        """Full coefficient vector from free values (constrained default 0)."""
        out = np.zeros(self.ndof)
        out[self.free] = free_values
        if constrained_values is not None:
            out[self.constrained] = constrained_values
        return out

    def evaluate(self, coeffs: np.ndarray, points: np.ndarray, dx: int = 0, dy: int = 0, elements=None) -> np.ndarray:
        """Evaluate a finite element function at per-element points (n, npts, 2)."""
        loc = self.local(coeffs)
        if elements is not None:
            loc = loc[elements]
        phi = self.basis.evaluate(points, dx, dy, elements)
        if phi.ndim == 4:
            return np.einsum("eqjc,ej->eqc", phi, loc)
        return np.einsum("eqj,ej->eq", phi, loc)


def _mesh_edges(mesh: Mesh) -> EdgeData:
    return EdgeData.from_mesh(mesh)


def build_velocity_space(mesh: Mesh, k: int, drop_interior: bool = False) -> FeSpace:
    """Stenberg space of order ``k`` with strong boundary constraints.

    Constrained DOFs are both components at boundary vertices and all
    normal moments on boundary edges.  ``drop_interior`` additionally fixes
    the interior Nedelec moments (a deliberately defective space used as a
    negative control).
    """
    if k < 2:
        raise ValueError(f"velocity order must satisfy k >= 2, got k={k}")
    tri = mesh.element_vertices
    edges = _mesh_edges(mesh)
    basis = stenberg_basis(tri, k, edges)
    fun = StenbergFunctionals(tri, k, edges, basis.frame, default_degree(k))
    ned = nedelec_dim(k - 2)
    nv, ne, nt = mesh.nv, mesh.ne, mesh.nt
    e0 = 2 * nv
    i0 = e0 + (k - 1) * ne
    ndof = i0 + ned * nt

    vdofs = (2 * mesh.triangles[:, :, None] + np.arange(2)).reshape(nt, 6)
    edofs = (e0 + (k - 1) * mesh.element_facets[:, :, None] + np.arange(k - 1)).reshape(nt, -1)
    idofs = i0 + ned * np.arange(nt)[:, None] + np.arange(ned)
    element_dofs = np.concatenate([vdofs, edofs, idofs], axis=1)

    bv = np.flatnonzero(mesh.vertex_on_boundary)
    bf = mesh.boundary_facets
    cons = [(2 * bv[:, None] + np.arange(2)).ravel(), (e0 + (k - 1) * bf[:, None] + np.arange(k - 1)).ravel()]
    if drop_interior:
        cons.append(np.arange(i0, ndof))
    constrained = np.unique(np.concatenate(cons))
    offsets = {"vertex": 0, "edge": e0, "element": i0}
    return FeSpace("velocity", k, mesh, basis, element_dofs, ndof, offsets, constrained, fun)


def build_pressure_space(mesh: Mesh, degree: int) -> FeSpace:
    """Discontinuous P_degree space; the zero-mean condition is imposed by the solver."""
    if degree < 0:
        raise ValueError(f"pressure degree must be >= 0, got {degree}")
    basis = dg_basis(mesh.element_vertices, degree)
    n = dim_poly(degree)
    element_dofs = n * np.arange(mesh.nt)[:, None] + np.arange(n)
    return FeSpace(
        "pressure", degree, mesh, basis, element_dofs, n * mesh.nt,
        {"vertex": 0, "edge": 0, "element": 0}, np.zeros(0, dtype=np.int64),
    )


def build_potential_space(mesh: Mesh, degree: int) -> FeSpace:
    """Hermite space of polynomial ``degree`` (= k + 1) vanishing on the boundary.

    At boundary vertices the value and both first derivatives are fixed to
    zero, so that the curl of every member satisfies the velocity space's
    vertex constraints; boundary edge moments are fixed as well.
    """
    k = degree - 1
    if k < 2:
        raise ValueError(f"potential degree must satisfy k + 1 >= 3, got {degree}")
    tri = mesh.element_vertices
    edges = _mesh_edges(mesh)
    basis = hermite_basis(tri, degree, edges)
    fun = HermiteFunctionals(tri, k, edges, basis.frame, default_degree(k))
    nv, ne, nt = mesh.nv, mesh.ne, mesh.nt
    nedge = max(k - 2, 0)
    nint = dim_poly(k - 2)
    e0 = 3 * nv
    i0 = e0 + nedge * ne
    ndof = i0 + nint * nt

    vdofs = (3 * mesh.triangles[:, :, None] + np.arange(3)).reshape(nt, 9)
    edofs = (e0 + nedge * mesh.element_facets[:, :, None] + np.arange(nedge)).reshape(nt, -1)
    idofs = i0 + nint * np.arange(nt)[:, None] + np.arange(nint)
    element_dofs = np.concatenate([vdofs, edofs, idofs], axis=1)

    bv = np.flatnonzero(mesh.vertex_on_boundary)
    bf = mesh.boundary_facets
    constrained = np.unique(np.concatenate([
        (3 * bv[:, None] + np.arange(3)).ravel(),
        (e0 + nedge * bf[:, None] + np.arange(nedge)).ravel(),
    ]))
    offsets = {"vertex": 0, "edge": e0, "element": i0}
    return FeSpace("potential", degree, mesh, basis, element_dofs, ndof, offsets, constrained, fun)


def _scatter(space: FeSpace, local: np.ndarray) -> np.ndarray:
    out = np.zeros(space.ndof)
    out[space.element_dofs.ravel()] = local.ravel()
    return out


def interpolate(space: FeSpace, func: Callable, grad: Callable | None = None, quad_degree: int | None = None) -> np.ndarray:
    """Apply the global DOF functionals of ``space`` to a function.

    ``func`` maps an array of points (..., 2) to values (..., 2) for the
    velocity space and (...,) otherwise.  The potential space also needs
    ``grad`` returning (..., 2).  For the pressure space the result is the
    L2 projection (moments against the orthonormal basis).
    """
    if space.tag == "velocity":
        vals = space.functionals.apply(lambda pts: np.asarray(func(pts))[:, :, None, :])
        return _scatter(space, vals[..., 0])
    if space.tag == "potential":
        if grad is None:
            raise ValueError("the Hermite interpolant needs a gradient callback")

        def evaluate(pts, dx, dy):
            if dx == 0 and dy == 0:
                return np.asarray(func(pts))[..., None]
            return np.asarray(grad(pts))[..., 0 if dx else 1][..., None]

        vals = space.functionals.apply(evaluate)
        return _scatter(space, vals[..., 0])
    return project_pressure(space, func, quad_degree)


def project_pressure(space: FeSpace, func: Callable, quad_degree: int | None = None) -> np.ndarray:
    """L2 projection onto the DG space (no mean correction)."""
    mesh = space.mesh
    rule = triangle_rule(quad_degree or default_degree(space.order + 1))
    pts = _volume_points(mesh.element_vertices, rule.points)
    w = 2.0 * rule.weights[None, :] * mesh.areas[:, None]
    phi = space.basis.evaluate(pts)
    vals = np.asarray(func(pts))
    local = np.einsum("eq,eqj,eq->ej", w, phi, vals)
    return _scatter(space, local)


def pressure_mean_vector(space: FeSpace) -> np.ndarray:
    """Integrals of the pressure basis functions, ``m_j = (q_j, 1)``."""
    mesh = space.mesh
    rule = triangle_rule(max(space.order, 1))
    pts = _volume_points(mesh.element_vertices, rule.points)
    w = 2.0 * rule.weights[None, :] * mesh.areas[:, None]
    local = np.einsum("eq,eqj->ej", w, space.basis.evaluate(pts))
    return _scatter(space, local)


def velocity_dof_count(nv: int, ne: int, nt: int, k: int) -> int:
    return 2 * nv + (k - 1) * ne + (k - 1) * (k + 1) * nt


def pressure_dof_count(nt: int, k: int) -> int:
    return dim_poly(k - 1) * nt
