"""Conforming triangulations of the unit square with oriented facet data.

A :class:`Mesh` stores vertices, counter-clockwise triangles and the derived
facet (edge) structure.  Every facet ``F`` carries a fixed unit normal
``n_F``: on interior facets it points from the lower-indexed adjacent
triangle (the "minus" side) into the higher-indexed one, on boundary facets
it is the outward normal.  Facet endpoints are stored sorted ascending, and
the local edge ``l`` of a triangle is the one opposite its local vertex ``l``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for invalid mesh input or construction parameters."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh with derived facet connectivity.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counter-clockwise
    facets : (ne, 2) int array, ``facets[:, 0] < facets[:, 1]``
    facet_elements : (ne, 2) int array
        Adjacent triangles, lower index first; ``-1`` in column 1 marks a
        boundary facet.
    element_facets : (nt, 3) int array
        Global facet index of the local edge opposite each local vertex.
    facet_normals : (ne, 2) float array
    facet_lengths : (ne,) float array
    """

    vertices: np.ndarray
    triangles: np.ndarray
    facets: np.ndarray
    facet_elements: np.ndarray
    element_facets: np.ndarray
    facet_normals: np.ndarray
    facet_lengths: np.ndarray

    @classmethod
    def from_arrays(cls, vertices, triangles) -> "Mesh":
        """Build a mesh from vertex coordinates and triangle connectivity.

        Triangles are reoriented counter-clockwise; degenerate triangles and
        non-manifold edges are rejected.
        """
        p = np.array(vertices, dtype=float)
        t = np.array(triangles, dtype=np.int64)
        if p.ndim != 2 or p.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must have shape (nt, 3)")
        if t.size and (t.min() < 0 or t.max() >= len(p)):
            raise MeshError("triangle references a missing vertex")

        area2 = _signed_area2(p, t)
        flip = area2 < 0
        t[flip] = t[flip][:, [0, 2, 1]]
        if np.any(np.abs(area2) <= 1e-14 * max(1.0, np.ptp(p) ** 2)):
            raise MeshError("degenerate triangle in input")

        # local edge l is opposite local vertex l
        local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)
        edges = np.sort(local.reshape(-1, 2), axis=1)
        facets, inverse, counts = np.unique(
            edges, axis=0, return_inverse=True, return_counts=True
        )
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            raise MeshError("non-manifold edge shared by more than two triangles")
        element_facets = inverse.reshape(-1, 3)

        ne = len(facets)
        owner = np.repeat(np.arange(len(t)), 3)
        order = np.lexsort((owner, inverse))
        facet_elements = -np.ones((ne, 2), dtype=np.int64)
        sorted_facets = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_facets[1:] != sorted_facets[:-1]
        facet_elements[sorted_facets[first], 0] = owner[order][first]
        facet_elements[sorted_facets[~first], 1] = owner[order][~first]

        tangent = p[facets[:, 1]] - p[facets[:, 0]]
        lengths = np.linalg.norm(tangent, axis=1)
        normals = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / lengths[:, None]
        centroid = p[t].mean(axis=1)
        midpoint = 0.5 * (p[facets[:, 0]] + p[facets[:, 1]])
        outward = np.einsum("ij,ij->i", normals, midpoint - centroid[facet_elements[:, 0]])
        normals[outward < 0] *= -1.0

        for arr in (p, t, facets, facet_elements, element_facets, normals, lengths):
            arr.setflags(write=False)
        return cls(p, t, facets, facet_elements, element_facets, normals, lengths)

    # -- counts -----------------------------------------------------------
    @property
    def nv(self) -> int:
        return len(self.vertices)

    @property
    def nt(self) -> int:
        return len(self.triangles)

    @property
    def ne(self) -> int:
        return len(self.facets)

    # -- boundary data ----------------------------------------------------
    @property
    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_elements[:, 1] < 0)

    @property
    def interior_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_elements[:, 1] >= 0)

    @property
    def facet_on_boundary(self) -> np.ndarray:
        return self.facet_elements[:, 1] < 0

    @property
    def vertex_on_boundary(self) -> np.ndarray:
        flag = np.zeros(self.nv, dtype=bool)
        flag[self.facets[self.boundary_facets].ravel()] = True
        return flag

    # -- geometry ---------------------------------------------------------
    @property
    def element_vertices(self) -> np.ndarray:
        """Coordinates of triangle corners, shape (nt, 3, 2)."""
        return self.vertices[self.triangles]

    @property
    def areas(self) -> np.ndarray:
        return 0.5 * _signed_area2(self.vertices, self.triangles)

    @property
    def diameters(self) -> np.ndarray:
        """Element diameters h_K (longest edge)."""
        return self.facet_lengths[self.element_facets].max(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def element_centroids(self) -> np.ndarray:
        return self.element_vertices.mean(axis=1)


def _signed_area2(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    a, b, c = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


def build_structured_mesh(n: int, perturb: float = 0.0, seed: int = 0) -> Mesh:
    """Diagonal-split ``n x n`` mesh of the unit square.

    Interior vertices are moved by at most ``perturb / n`` in each coordinate,
    drawn from a generator seeded with ``seed``.
    """
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n!r}")
    if not 0.0 <= perturb <= 0.3:
        raise MeshError(f"perturb must lie in [0, 0.3], got {perturb!r}")
    n = int(n)
    s = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(s, s)
    p = np.stack([xx.ravel(), yy.ravel()], axis=1)

    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    t = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    t = t.reshape(2, -1, 3).transpose(1, 0, 2).reshape(-1, 3)

    if perturb > 0.0:
        rng = np.random.default_rng(seed)
        shift = rng.uniform(-1.0, 1.0, size=p.shape) * (perturb / n)
        on_bdry = (
            np.isclose(p[:, 0], 0.0) | np.isclose(p[:, 0], 1.0)
            | np.isclose(p[:, 1], 0.0) | np.isclose(p[:, 1], 1.0)
        )
        shift[on_bdry] = 0.0
        p = p + shift
    return Mesh.from_arrays(p, t)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: split every triangle into four through edge midpoints."""
    p = mesh.vertices
    mid = 0.5 * (p[mesh.facets[:, 0]] + p[mesh.facets[:, 1]])
    pnew = np.concatenate([p, mid])
    t = mesh.triangles
    m = mesh.nv + mesh.element_facets  # m[:, l] is the midpoint opposite vertex l
    children = np.stack(
        [
            np.stack([t[:, 0], m[:, 2], m[:, 1]], 1),
            np.stack([m[:, 2], t[:, 1], m[:, 0]], 1),
            np.stack([m[:, 1], m[:, 0], t[:, 2]], 1),
            np.stack([m[:, 0], m[:, 1], m[:, 2]], 1),
        ],
        axis=1,
    ).reshape(-1, 3)
    return Mesh.from_arrays(pnew, children)


def mesh_hierarchy(n0: int, levels: int, perturb: float = 0.0, seed: int = 0) -> list[Mesh]:
    """Nested meshes; level 1 is the structured ``n0`` mesh."""
    meshes = [build_structured_mesh(n0, perturb, seed)]
    for _ in range(levels - 1):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def element_angles(mesh: Mesh) -> np.ndarray:
    """Interior angles, shape (nt, 3); column l is the angle at local vertex l."""
    x = mesh.element_vertices
    out = np.empty((mesh.nt, 3))
    for l in range(3):
        u = x[:, (l + 1) % 3] - x[:, l]
        v = x[:, (l + 2) % 3] - x[:, l]
        cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        out[:, l] = np.arctan2(np.abs(cross), np.einsum("ij,ij->i", u, v))
    return out


def mesh_metrics(mesh: Mesh) -> tuple[float, float, float]:
    """Return ``(h, min_angle, max_ratio)``.

    ``max_ratio`` is the largest ratio of element diameter to inscribed
    circle diameter.
    """
    perimeter = mesh.facet_lengths[mesh.element_facets].sum(axis=1)
    inradius = 2.0 * mesh.areas / perimeter
    ratio = mesh.diameters / (2.0 * inradius)
    return mesh.h, float(element_angles(mesh).min()), float(ratio.max())


def read_mesh(path: str | Path) -> Mesh:
    """Read the plain-text format ``nv ne_unused nt`` / vertices / triangles.

    Vertex lines are ``x y boundary_flag``; the flag is checked against the
    topology, facets are always derived.
    """
    tokens = Path(path).read_text().split()
    try:
        nv, _, nt = (int(tok) for tok in tokens[:3])
        pos = 3
        rows = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        tri = np.array(tokens[pos:pos + 3 * nt], dtype=np.int64).reshape(nt, 3)
    except ValueError as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    if pos + 3 * nt != len(tokens):
        raise MeshError(f"malformed mesh file {path}: unexpected token count")
    mesh = Mesh.from_arrays(rows[:, :2], tri)
    if np.any((rows[:, 2] != 0) != mesh.vertex_on_boundary):
        raise MeshError("boundary flags disagree with mesh topology")
    return mesh


def write_mesh(mesh: Mesh, path: str | Path) -> None:
    flags = mesh.vertex_on_boundary.astype(int)
    lines = [f"{mesh.nv} {mesh.ne} {mesh.nt}"]
    lines += [f"{x!r} {y!r} {f}" for (x, y), f in zip(mesh.vertices.tolist(), flags)]
    lines += [" ".join(map(str, tri)) for tri in mesh.triangles.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")
