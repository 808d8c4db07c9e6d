"""Assembly of the stabilized H(div) Oseen scheme.

Bilinear forms, with ``[.]`` and ``{.}`` the facet jump and average
(``[v] = v_minus - v_plus`` across interior facets, ``[v] = v`` on the
boundary):

* ``D`` symmetric interior penalty diffusion with penalty ``sigma / h_F``
  on all facets;
* ``C`` convection ``((b.grad) u, v)_h - <(b.n)[u], {v}>`` on interior
  facets plus the jump penalty ``gamma |b.n| <[u], [v]>`` (all facets for
  upwinding, boundary facets only for the central flux);
* ``R`` reaction ``(c u, v)``;
* ``S`` vorticity stabilization
  ``delta0 (tau curl L u, curl L v)_h + delta0 h_F^2 <[(b.grad)u x n], [(b.grad)v x n]>``;
* ``B`` pressure coupling ``-(div u, q)``.

Matrices are assembled over all DOFs and restricted to the free velocity
DOFs on request.  Dirichlet data enters twice: strongly through the
constrained DOFs, and weakly through the boundary jump terms, where the
exterior state is the data itself.  Those weak contributions are collected
in the right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from .fe_basis import _volume_points
from .fe_space import FeSpace, interpolate
from .problem import OseenCoefficients
from .quadrature import default_degree, edge_rule, triangle_rule

CHUNK = 2048
CONVECTION_SCHEMES = ("upwind", "central", "none")


@dataclass
class DiscretizationParams:
    """Discretization choices; ``sigma=None`` resolves to ``6(k+1)(k+2)/2``."""

    k: int = 2
    sigma: float | None = None
    delta0: float = 1e-5
    convection: str = "upwind"
    vorticity_stab: bool = True
    b_inf: float | None = None
    quad_degree: int | None = None
    facet_quad_degree: int | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"velocity order must satisfy k >= 2, got k={self.k}")
        if self.convection not in CONVECTION_SCHEMES:
            raise ValueError(f"unknown convection scheme {self.convection!r}")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.delta0 < 0:
            raise ValueError("delta0 must be nonnegative")
        if self.b_inf is not None and not self.b_inf > 0:
            raise ValueError("b_inf must be positive")

    @property
    def penalty(self) -> float:
        if self.sigma is None:
            d = 2
            return 6.0 * (self.k + 1) * (self.k + d) / d
        return float(self.sigma)

    @property
    def volume_degree(self) -> int:
        return self.quad_degree or default_degree(self.k)

    @property
    def facet_degree(self) -> int:
        return self.facet_quad_degree or default_degree(self.k)


@dataclass(eq=False)
class AssembledForms:
    """Matrices on free velocity DOFs (``B`` has all pressure rows).

    ``G`` is the velocity load with Dirichlet lifting applied and
    ``G_div`` the matching right-hand side of the continuity equation.
    ``full`` keeps the unrestricted matrices.
    """

    D: sps.csr_matrix
    C: sps.csr_matrix
    R: sps.csr_matrix
    S: sps.csr_matrix
    B: sps.csr_matrix
    G: np.ndarray
    G_div: np.ndarray
    gamma: np.ndarray
    tau: np.ndarray
    b_inf: float
    nu: float
    dirichlet_values: np.ndarray
    full: dict = field(default_factory=dict, repr=False)

    @property
    def A(self) -> sps.csr_matrix:
        return (self.nu * self.D + self.C + self.R + self.S).tocsr()


# -- geometry helpers -------------------------------------------------------

def _volume_chunks(mesh, degree):
    rule = triangle_rule(degree)
    for start in range(0, mesh.nt, CHUNK):
        elems = np.arange(start, min(start + CHUNK, mesh.nt))
        pts = _volume_points(mesh.element_vertices[elems], rule.points)
        w = 2.0 * rule.weights[None, :] * mesh.areas[elems, None]
        yield elems, pts, w


def _facet_chunks(mesh, facets, degree):
    rule = edge_rule(degree)
    p = mesh.vertices
    for start in range(0, len(facets), CHUNK):
        fs = facets[start:start + CHUNK]
        a, b = p[mesh.facets[fs, 0]], p[mesh.facets[fs, 1]]
        pts = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
        w = rule.weights[None, :] * mesh.facet_lengths[fs, None]
        yield fs, pts, w


def facet_quadrature_points(mesh, degree):
    """Quadrature points of every facet, shape (ne, nq, 2)."""
    rule = edge_rule(degree)
    p = mesh.vertices
    a, b = p[mesh.facets[:, 0]], p[mesh.facets[:, 1]]
    return a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]


def compute_b_inf(mesh, coeffs: OseenCoefficients, degree: int) -> float:
    """Largest Euclidean norm of ``b`` over all volume quadrature points."""
    best = 0.0
    for _, pts, _ in _volume_chunks(mesh, degree):
        best = max(best, float(np.linalg.norm(coeffs.b(pts), axis=-1).max()))
    return best


def compute_tau(mesh, coeffs: OseenCoefficients, params: DiscretizationParams, b_inf: float | None = None) -> np.ndarray:
    """``tau_K = min(1, |b|_inf h_K / nu) h_K^3 / |b|_inf`` per element."""
    b_inf = b_inf if b_inf is not None else (params.b_inf or compute_b_inf(mesh, coeffs, params.volume_degree))
    if not b_inf > 0:
        raise ValueError("tau is undefined for a vanishing advection field (b_inf = 0)")
    hK = mesh.diameters
    return np.minimum(1.0, b_inf * hK / coeffs.nu) * hK ** 3 / b_inf


# -- pointwise operators ----------------------------------------------------

def _grad(d):
    """Stack first derivatives as (..., comp, deriv)."""
    return np.stack([d[(1, 0)], d[(0, 1)]], axis=-1)


def curl_L(d, nu, b, Jb, c, gc):
    """``curl(-nu Lap v + (b.grad) v + c v)`` from derivatives up to order 3.

    ``d`` maps ``(dx, dy)`` to vector values (..., [nloc,] 2); coefficient
    arrays carry the leading point shape and are broadcast over a basis axis.
    """
    extra = d[(0, 0)].ndim > b.ndim  # a basis axis is present

    def e(a):
        return a[..., None] if extra else a

    curl = d[(1, 0)][..., 1] - d[(0, 1)][..., 0]
    curl_x = d[(2, 0)][..., 1] - d[(1, 1)][..., 0]
    curl_y = d[(1, 1)][..., 1] - d[(0, 2)][..., 0]
    lap_curl = d[(3, 0)][..., 1] + d[(1, 2)][..., 1] - d[(2, 1)][..., 0] - d[(0, 3)][..., 0]
    v1, v2 = d[(0, 0)][..., 0], d[(0, 0)][..., 1]
    v1x, v1y = d[(1, 0)][..., 0], d[(0, 1)][..., 0]
    v2x, v2y = d[(1, 0)][..., 1], d[(0, 1)][..., 1]
    out = -nu * lap_curl
    out = out + e(Jb[..., 0, 0]) * v2x + e(Jb[..., 1, 0]) * v2y
    out = out - e(Jb[..., 0, 1]) * v1x - e(Jb[..., 1, 1]) * v1y
    out = out + e(b[..., 0]) * curl_x + e(b[..., 1]) * curl_y
    out = out + e(gc[..., 0]) * v2 - e(gc[..., 1]) * v1 + e(c) * curl
    return out


def _cross_n(w, n):
    """Scalar ``w x n = w1 n2 - w2 n1`` with n of shape (nf, 2)."""
    shape = (len(n),) + (1,) * (w.ndim - 2)
    return w[..., 0] * n[:, 1].reshape(shape) - w[..., 1] * n[:, 0].reshape(shape)


# -- sparse accumulation ----------------------------------------------------

class _Accumulator:
    """Buffers COO triplets and folds them into a CSR matrix in batches."""

    FLUSH = 4_000_000

    def __init__(self, shape):
        self.shape = shape
        self._mat = sps.csr_matrix(shape)
        self._parts = []
        self._size = 0

    def add(self, local, rows, cols):
        r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
        c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
        self._parts.append((local.ravel(), r, c))
        self._size += local.size
        if self._size > self.FLUSH:
            self._flush()

    def _flush(self):
        if self._parts:
            v, r, c = (np.concatenate(x) for x in zip(*self._parts))
            self._mat = self._mat + sps.csr_matrix((v, (r, c)), shape=self.shape)
            self._parts, self._size = [], 0

    @property
    def mat(self):
        self._flush()
        return self._mat


ALL_TERMS = ("D", "C", "R", "S", "B", "G", "K", "Jh", "Jb", "M")


def assemble_full(V: FeSpace, coeffs: OseenCoefficients | None, params: DiscretizationParams, terms=ALL_TERMS, Q: FeSpace | None = None) -> dict:
    """Assemble the requested terms over all velocity DOFs.

    Term keys: ``D C R S B G`` as in the scheme, plus the Gram matrices
    ``K`` (broken gradient), ``Jh`` (``h_F^-1 <[u],[v]>``), ``Jb``
    (``|b.n| <[u],[v]>``) and ``M`` (mass).  Also returns ``tau``,
    ``b_inf`` and the pointwise upwind weights ``gamma``.
    """
    mesh = V.mesh
    terms = set(terms)
    n = V.ndof
    need_b = coeffs is not None and bool(terms & {"C", "S", "G", "Jb"})
    if need_b:
        b_inf = params.b_inf or compute_b_inf(mesh, coeffs, params.volume_degree)
    else:
        b_inf = np.nan
    stab = params.vorticity_stab and params.delta0 > 0 and coeffs is not None
    if stab and ("S" in terms or "G" in terms):
        tau = compute_tau(mesh, coeffs, params, b_inf)
        if "G" in terms and coeffs.curl_f is None:
            raise ValueError("curl_f is required when vorticity stabilization is on")
    else:
        tau = np.zeros(mesh.nt)
    sigma, delta0, conv = params.penalty, params.delta0, params.convection
    nu = coeffs.nu if coeffs is not None else 1.0

    acc = {t: _Accumulator((n, n)) for t in terms & {"D", "C", "R", "S", "K", "Jh", "Jb", "M"}}
    if "B" in terms:
        if Q is None:
            raise ValueError("pressure space required for B")
        acc["B"] = _Accumulator((Q.ndof, n))
    G = np.zeros(n)
    gamma = np.full((mesh.ne, edge_rule(params.facet_degree).points.size), 0.5)

    # volume terms
    vol_terms = terms & {"D", "C", "R", "S", "B", "G", "K", "M"}
    if vol_terms:
        order = 3 if stab and terms & {"S", "G"} else 1
        for elems, pts, w in _volume_chunks(mesh, params.volume_degree):
            d = V.basis.derivatives(pts, order, elems)
            val = d[(0, 0)]
            grad = _grad(d)
            dofs = V.element_dofs[elems]
            if "D" in terms or "K" in terms:
                loc = np.einsum("eq,eqaij,eqbij->eab", w, grad, grad)
                for t in ("D", "K"):
                    if t in terms:
                        acc[t].add(loc, dofs, dofs)
            if "M" in terms:
                acc["M"].add(np.einsum("eq,eqai,eqbi->eab", w, val, val), dofs, dofs)
            if coeffs is not None:
                bq = coeffs.b(pts) if need_b or order == 3 else None
            if "C" in terms and conv != "none":
                cv = np.einsum("eqj,eqbij->eqbi", bq, grad)
                acc["C"].add(np.einsum("eq,eqbi,eqai->eab", w, cv, val), dofs, dofs)
            if "R" in terms:
                cq = coeffs.c(pts)
                acc["R"].add(np.einsum("eq,eqai,eqbi->eab", w * cq, val, val), dofs, dofs)
            if "B" in terms:
                div = grad[..., 0, 0] + grad[..., 1, 1]
                q = Q.basis.evaluate(pts, elements=elems)
                acc["B"].add(-np.einsum("eq,eqj,eqi->eji", w, q, div), Q.element_dofs[elems], dofs)
            cl = None
            if stab and terms & {"S", "G"}:
                cl = curl_L(d, coeffs.nu, bq, coeffs.grad_b(pts), coeffs.c(pts), coeffs.grad_c(pts))
                wt = w * tau[elems, None]
            if "S" in terms and stab:
                acc["S"].add(delta0 * np.einsum("eq,eqa,eqb->eab", wt, cl, cl), dofs, dofs)
            if "G" in terms:
                loc = np.einsum("eq,eqc,eqac->ea", w, coeffs.f(pts), val)
                if stab:
                    loc += delta0 * np.einsum("eq,eq,eqa->ea", wt, coeffs.curl_f(pts), cl)
                np.add.at(G, dofs.ravel(), loc.ravel())

    # facet terms
    fac_terms = terms & {"D", "C", "S", "G", "Jh", "Jb"}
    if fac_terms:
        for boundary in (False, True):
            facets = mesh.boundary_facets if boundary else mesh.interior_facets
            for fs, pts, w in _facet_chunks(mesh, facets, params.facet_degree):
                _facet_block(
                    V, coeffs, params, terms, acc, G, gamma, fs, pts, w, boundary,
                    sigma, delta0, conv, nu, stab,
                )

    out = {t: a.mat for t, a in acc.items()}
    if "G" in terms:
        out["G"] = G
    out["tau"] = tau
    out["b_inf"] = b_inf
    out["gamma"] = gamma
    return out


def _facet_block(V, coeffs, params, terms, acc, G, gamma, fs, pts, w, boundary, sigma, delta0, conv, nu, stab):
    mesh = V.mesh
    nrm = mesh.facet_normals[fs]
    hF = mesh.facet_lengths[fs]
    em = mesh.facet_elements[fs, 0]
    dm = V.basis.derivatives(pts, 1, em)
    gn_m = np.einsum("fqaij,fj->fqai", _grad(dm), nrm)
    if boundary:
        jump, avg, gn = dm[(0, 0)], dm[(0, 0)], gn_m
        dofs = V.element_dofs[em]
    else:
        ep = mesh.facet_elements[fs, 1]
        dp = V.basis.derivatives(pts, 1, ep)
        gn_p = np.einsum("fqaij,fj->fqai", _grad(dp), nrm)
        jump = np.concatenate([dm[(0, 0)], -dp[(0, 0)]], axis=2)
        avg = 0.5 * np.concatenate([dm[(0, 0)], dp[(0, 0)]], axis=2)
        gn = 0.5 * np.concatenate([gn_m, gn_p], axis=2)
        dofs = np.concatenate([V.element_dofs[em], V.element_dofs[ep]], axis=1)

    jj = None
    if terms & {"D", "Jh"}:
        jj = np.einsum("fq,fqai,fqbi->fab", w, jump, jump)
        if "Jh" in terms:
            acc["Jh"].add(jj / hF[:, None, None], dofs, dofs)
    if "D" in terms:
        cons = np.einsum("fq,fqbi,fqai->fab", w, gn, jump)
        acc["D"].add(-cons - cons.transpose(0, 2, 1) + (sigma / hF)[:, None, None] * jj, dofs, dofs)

    if coeffs is None or not terms & {"C", "S", "G", "Jb"}:
        return
    bq = coeffs.b(pts)
    bn = np.einsum("fqj,fj->fq", bq, nrm)
    if boundary:
        g = 0.5 * (1.0 - np.sign(bn))
        gamma[fs] = g
    else:
        g = np.full_like(bn, 0.5)
    upw = g * np.abs(bn)
    if "Jb" in terms:
        acc["Jb"].add(np.einsum("fq,fqai,fqbi->fab", w * np.abs(bn), jump, jump), dofs, dofs)
    jump_pen = conv == "upwind" or (conv == "central" and boundary)
    if "C" in terms and conv != "none":
        loc = np.zeros((len(fs), dofs.shape[1], dofs.shape[1]))
        if not boundary:
            loc -= np.einsum("fq,fqbi,fqai->fab", w * bn, jump, avg)
        if jump_pen:
            loc += np.einsum("fq,fqai,fqbi->fab", w * upw, jump, jump)
        acc["C"].add(loc, dofs, dofs)

    X = None
    if stab and terms & {"S", "G"}:
        def xn(d):
            return _cross_n(np.einsum("fqj,fqaij->fqai", bq, _grad(d)), nrm)

        X = xn(dm) if boundary else np.concatenate([xn(dm), -xn(dp)], axis=2)
        ws = delta0 * w * (hF ** 2)[:, None]
        if "S" in terms:
            acc["S"].add(np.einsum("fq,fqa,fqb->fab", ws, X, X), dofs, dofs)

    if "G" in terms and boundary and coeffs.dirichlet is not None:
        gq = coeffs.dirichlet(pts)
        loc = nu * (
            -np.einsum("fq,fqi,fqai->fa", w, gq, gn)
            + np.einsum("fq,fqi,fqai->fa", w * (sigma / hF)[:, None], gq, jump)
        )
        if conv != "none":
            loc += np.einsum("fq,fqi,fqai->fa", w * upw, gq, jump)
        if X is not None:
            bg = np.einsum("fqj,fqij->fqi", bq, coeffs.grad_dirichlet(pts))
            loc += np.einsum("fq,fq,fqa->fa", ws, _cross_n(bg, nrm), X)
        np.add.at(G, dofs.ravel(), loc.ravel())


# -- public assembly entry points ----------------------------------------

def _restrict(mat, V):
    free = V.free
    return mat.tocsr()[free][:, free]


def assemble_diffusion(V: FeSpace, params: DiscretizationParams, full: bool = False):
    """SIP diffusion matrix ``D`` (without the viscosity factor)."""
    D = assemble_full(V, None, params, ("D",))["D"]
    return D if full else _restrict(D, V)


def assemble_convection(V: FeSpace, coeffs: OseenCoefficients, params: DiscretizationParams, full: bool = False):
    C = assemble_full(V, coeffs, params, ("C",))["C"]
    return C if full else _restrict(C, V)


def assemble_reaction(V: FeSpace, coeffs: OseenCoefficients, params: DiscretizationParams | None = None, full: bool = False):
    params = params or DiscretizationParams(k=V.order)
    R = assemble_full(V, coeffs, params, ("R",))["R"]
    return R if full else _restrict(R, V)


def assemble_vorticity_stab(V: FeSpace, coeffs: OseenCoefficients, params: DiscretizationParams, full: bool = False):
    if coeffs.grad_b is None or coeffs.grad_c is None:
        raise ValueError("vorticity stabilization needs grad_b and grad_c")
    out = assemble_full(V, coeffs, params, ("S",))
    S = out.get("S", sps.csr_matrix((V.ndof, V.ndof)))
    return S if full else _restrict(S, V)


def assemble_pressure_coupling(V: FeSpace, Q: FeSpace, full: bool = False):
    """``B[j, i] = -(div phi_i, q_j)``; rows are all pressure DOFs."""
    params = DiscretizationParams(k=V.order)
    B = assemble_full(V, None, params, ("B",), Q=Q)["B"].tocsr()
    return B if full else B[:, V.free]


def assemble_rhs(V: FeSpace, coeffs: OseenCoefficients, params: DiscretizationParams):
    """Load vector over all velocity DOFs, including weak boundary-data terms."""
    return assemble_full(V, coeffs, params, ("G",))["G"]


def broken_h1_gram(V: FeSpace, full: bool = False):
    """Gram matrix of ``|v|_{1,h}^2 = |grad v|_h^2 + sum_F h_F^-1 |[v]|_F^2``."""
    params = DiscretizationParams(k=V.order)
    out = assemble_full(V, None, params, ("K", "Jh"))
    M1 = (out["K"] + out["Jh"]).tocsr()
    return M1 if full else _restrict(M1, V)


def dirichlet_values(V: FeSpace, coeffs: OseenCoefficients) -> np.ndarray:
    """Values of the constrained velocity DOFs from the boundary data."""
    if coeffs.dirichlet is None:
        return np.zeros(len(V.constrained))
    return interpolate(V, coeffs.dirichlet)[V.constrained]


def assemble_forms(V: FeSpace, Q: FeSpace, coeffs: OseenCoefficients, params: DiscretizationParams) -> AssembledForms:
    """Assemble every term of the scheme and apply the Dirichlet lifting."""
    out = assemble_full(V, coeffs, params, ("D", "C", "R", "S", "B", "G"), Q=Q)
    n = V.ndof
    for t in ("D", "C", "R", "S"):
        out.setdefault(t, sps.csr_matrix((n, n)))
    A_full = (coeffs.nu * out["D"] + out["C"] + out["R"] + out["S"]).tocsr()
    free, cons = V.free, V.constrained
    ug = dirichlet_values(V, coeffs)
    B_full = out["B"].tocsr()
    G = out["G"][free] - A_full[free][:, cons] @ ug
    G_div = -(B_full[:, cons] @ ug)
    return AssembledForms(
        D=_restrict(out["D"], V), C=_restrict(out["C"], V), R=_restrict(out["R"], V),
        S=_restrict(out["S"], V), B=B_full[:, free], G=G, G_div=G_div,
        gamma=out["gamma"], tau=out["tau"], b_inf=out["b_inf"], nu=coeffs.nu,
        dirichlet_values=ug, full={**out, "A": A_full},
    )


def curl_map(Z: FeSpace, V: FeSpace, free: bool = True):
    """Matrix taking Hermite coefficients to Stenberg coefficients of their curl.

    Each local Hermite basis function's curl is a polynomial vector field;
    applying the Stenberg DOFs to it gives its exact expansion.  Shared
    DOFs receive identical values from every adjacent element.
    """
    if Z.mesh is not V.mesh:
        raise ValueError("curl_map needs spaces on the same mesh")
    local = V.functionals.apply(lambda pts: Z.basis.curl(pts))  # (nt, nV, nZ)
    rows = np.broadcast_to(V.element_dofs[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(Z.element_dofs[:, None, :], local.shape).ravel()
    vals = local.ravel()
    key = rows.astype(np.int64) * Z.ndof + cols
    _, first = np.unique(key, return_index=True)
    keep = first[np.abs(vals[first]) > 0]
    mat = sps.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(V.ndof, Z.ndof))
    if free:
        return mat[V.free][:, Z.free]
    return mat


def norm_matrix(V: FeSpace, coeffs: OseenCoefficients, params: DiscretizationParams, include_s: bool = True, full: bool = False):
    """Gram matrix of the energy norm: ``nu (K + sigma Jh) + Jb + S + r0 M``."""
    terms = ["K", "Jh", "Jb", "M"] + (["S"] if include_s else [])
    out = assemble_full(V, coeffs, params, terms)
    N = coeffs.nu * (out["K"] + params.penalty * out["Jh"]) + out["Jb"] + coeffs.r0 * out["M"]
    if include_s and "S" in out:
        N = N + out["S"]
    N = N.tocsr()
    return N if full else _restrict(N, V)


def triple_norm(V: FeSpace, coeffs: OseenCoefficients, params: DiscretizationParams, v: np.ndarray, include_s: bool = True) -> float:
    """Energy norm of a discrete function given by its full coefficient vector.

    Jumps are taken as defined on the mesh, so boundary facets see the
    one-sided trace.  Errors against a smooth exact solution are measured
    with :func:`stenberg_oseen.analysis.compute_errors` instead.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (V.ndof,):
        raise ValueError(f"expected a coefficient vector of length {V.ndof}, got {v.shape}")
    N = norm_matrix(V, coeffs, params, include_s=include_s, full=True)
    return float(np.sqrt(max(v @ (N @ v), 0.0)))
