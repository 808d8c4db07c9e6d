"""Error norms, convergence studies and structural audits.

Everything here turns assembled systems and solves into tables: error
reports against manufactured solutions, h-based convergence rates, rank
audits of the discrete complex ``Z_h -> V_h -> Q_h``, discrete inf-sup
constants, pressure-robustness checks and DOF bookkeeping.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla
import sympy as sp

from .fe_basis import dim_poly
from .fe_space import (
    FeSpace,
    build_potential_space,
    interpolate,
    build_pressure_space,
    build_velocity_space,
    pressure_mean_vector,
    project_pressure,
    velocity_dof_count,
)
from .forms import (
    DiscretizationParams,
    _cross_n,
    _facet_chunks,
    _grad,
    _volume_chunks,
    assemble_forms,
    assemble_full,
    assemble_pressure_coupling,
    broken_h1_gram,
    compute_b_inf,
    compute_tau,
    curl_L,
    curl_map,
)
from .mesh import Mesh, mesh_hierarchy, mesh_metrics, read_mesh, refine_uniform
from .problem import X, Y, ManufacturedSolution, benchmark_solution, polynomial_solution
from .solver import InfSupReport, SolveReport, estimate_infsup, schur_min_eigenvalue, solve_saddle

log = logging.getLogger(__name__)

PROBLEMS = ("paper-benchmark", "polynomial-mms")
RANK_RTOL = 1e-9
DENSE_RANK_LIMIT = 3000


# -- configuration ----------------------------------------------------------

@dataclass
class StudyConfig:
    """Fully resolved run parameters.  ``sigma=None`` means the automatic penalty."""

    problem: str = "paper-benchmark"
    nu: float = 1e-6
    k: int = 2
    levels: int = 4
    n0: int = 12
    perturb: float = 0.2
    seed: int = 0
    sigma: float | None = None
    delta0: float = 1e-5
    convection: str = "upwind"
    vorticity: bool = True
    quad_degree: int | None = None
    facet_quad_degree: int | None = None
    mesh_file: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")
        self.params()  # validates k, sigma, delta0, convection

    def params(self) -> DiscretizationParams:
        return DiscretizationParams(
            k=self.k, sigma=self.sigma, delta0=self.delta0, convection=self.convection,
            vorticity_stab=self.vorticity, quad_degree=self.quad_degree,
            facet_quad_degree=self.facet_quad_degree,
        )

    def solution(self) -> ManufacturedSolution:
        if self.problem == "paper-benchmark":
            return benchmark_solution(self.nu)
        return polynomial_solution(self.k, self.nu)

    def meshes(self, levels: int | None = None) -> list[Mesh]:
        """Level 1 is the structured mesh (or ``mesh_file``); each level refines the last."""
        levels = levels or self.levels
        if self.mesh_file is None:
            return mesh_hierarchy(self.n0, levels, self.perturb, self.seed)
        out = [read_mesh(self.mesh_file)]
        while len(out) < levels:
            out.append(refine_uniform(out[-1]))
        return out

    def resolved(self) -> dict:
        """All parameters with defaults materialized (``sigma`` as a number)."""
        out = asdict(self)
        out["sigma"] = self.params().penalty
        out["quad_degree"] = self.params().volume_degree
        out["facet_quad_degree"] = self.params().facet_degree
        return out

    def header(self) -> str:
        return "# config: " + json.dumps(self.resolved(), sort_keys=True)


# -- error norms ------------------------------------------------------------

@dataclass
class ErrorReport:
    """Error norms of a discrete solution against a manufactured one."""

    energy: float
    energy_includes_s: bool
    l2u: float
    divu: float
    linfu: float
    l2p: float
    l2p_proj: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not (np.isfinite(v) and v >= 0):
                raise ValueError(f"error entry {f.name} = {v} is not finite and nonnegative")


def _combine(d, loc):
    """Contract basis derivatives (e, q, a, c) with local coefficients (e, a)."""
    return {key: np.einsum("eqac,ea->eqc", val, loc) for key, val in d.items()}


def compute_errors(
    V: FeSpace,
    Q: FeSpace,
    u: np.ndarray,
    p: np.ndarray,
    solution: ManufacturedSolution,
    params: DiscretizationParams,
    include_s: bool = True,
) -> ErrorReport:
    """All error norms of ``(u, p)`` by quadrature.

    The exact velocity is continuous, so interior jumps of the error are
    minus the jumps of ``u``; on boundary facets the jump is the one-sided
    error.  The pressure is compared after removing the exact mean.
    """
    mesh = V.mesh
    coeffs = solution.coefficients()
    nu, r0 = coeffs.nu, coeffs.r0
    stab = include_s and params.vorticity_stab and params.delta0 > 0
    b_inf = params.b_inf or compute_b_inf(mesh, coeffs, params.volume_degree)
    tau = compute_tau(mesh, coeffs, params, b_inf) if stab else None
    pmean = solution.pressure_mean()
    uloc = V.local(u)
    ploc = Q.local(p)
    pi_loc = Q.local(project_pressure(Q, lambda x: solution.p(x) - pmean, params.volume_degree))

    grad2 = l2 = div2 = linf = p2 = pproj2 = s2 = 0.0
    order = 3 if stab else 1
    for elems, pts, w in _volume_chunks(mesh, params.volume_degree):
        d = _combine(V.basis.derivatives(pts, order, elems), uloc[elems])
        e = solution.u(pts) - d[(0, 0)]
        ge = solution.grad_u(pts) - _grad(d)
        l2 += np.sum(w * np.sum(e ** 2, axis=-1))
        grad2 += np.sum(w * np.sum(ge ** 2, axis=(-2, -1)))
        linf = max(linf, float(np.sqrt(np.sum(e ** 2, axis=-1)).max()))
        div2 += np.sum(w * (d[(1, 0)][..., 0] + d[(0, 1)][..., 1]) ** 2)
        qv = Q.basis.evaluate(pts, elements=elems)
        ph = np.einsum("eqj,ej->eq", qv, ploc[elems])
        p2 += np.sum(w * (solution.p(pts) - pmean - ph) ** 2)
        pproj2 += np.sum(w * (np.einsum("eqj,ej->eq", qv, pi_loc[elems]) - ph) ** 2)
        if stab:
            clh = curl_L(d, nu, coeffs.b(pts), coeffs.grad_b(pts), coeffs.c(pts), coeffs.grad_c(pts))
            s2 += params.delta0 * np.sum(w * tau[elems, None] * (solution.curl_Lu(pts) - clh) ** 2)

    jump_h = jump_b = 0.0
    for boundary in (False, True):
        facets = mesh.boundary_facets if boundary else mesh.interior_facets
        for fs, pts, w in _facet_chunks(mesh, facets, params.facet_degree):
            nrm = mesh.facet_normals[fs]
            em = mesh.facet_elements[fs, 0]
            dm = _combine(V.basis.derivatives(pts, 1, em), uloc[em])
            if boundary:
                jump = solution.u(pts) - dm[(0, 0)]
            else:
                ep = mesh.facet_elements[fs, 1]
                dp = _combine(V.basis.derivatives(pts, 1, ep), uloc[ep])
                jump = dp[(0, 0)] - dm[(0, 0)]
            jj = np.sum(jump ** 2, axis=-1)
            bq = coeffs.b(pts)
            bn = np.einsum("fqj,fj->fq", bq, nrm)
            jump_h += np.sum(w * jj / mesh.facet_lengths[fs, None])
            jump_b += np.sum(w * np.abs(bn) * jj)
            if stab:
                def bgrad(dd):
                    return np.einsum("fqj,fqij->fqi", bq, _grad(dd))
                if boundary:
                    exact = np.einsum("fqj,fqij->fqi", bq, solution.grad_u(pts))
                    xj = _cross_n(exact - bgrad(dm), nrm)
                else:
                    xj = _cross_n(bgrad(dp) - bgrad(dm), nrm)
                s2 += params.delta0 * np.sum(w * (mesh.facet_lengths[fs] ** 2)[:, None] * xj ** 2)

    energy2 = nu * grad2 + params.penalty * nu * jump_h + jump_b + r0 * l2 + s2
    return ErrorReport(
        energy=float(np.sqrt(energy2)), energy_includes_s=bool(stab),
        l2u=float(np.sqrt(l2)), divu=float(np.sqrt(div2)), linfu=float(linf),
        l2p=float(np.sqrt(p2)), l2p_proj=float(np.sqrt(pproj2)),
    )


def interpolate_exact(V: FeSpace, Q: FeSpace, solution: ManufacturedSolution, params: DiscretizationParams):
    """Velocity interpolant and zero-mean pressure projection of the exact solution."""
    pmean = solution.pressure_mean()
    return (
        interpolate(V, solution.u),
        project_pressure(Q, lambda x: solution.p(x) - pmean, params.volume_degree),
    )


def l2_difference(V: FeSpace, u1: np.ndarray, u2: np.ndarray, degree: int | None = None) -> float:
    """``|u1 - u2|_0`` for two velocity coefficient vectors."""
    diff = V.local(np.asarray(u1) - np.asarray(u2))
    total = 0.0
    for elems, pts, w in _volume_chunks(V.mesh, degree or 2 * V.order + 2):
        val = np.einsum("eqac,ea->eqc", V.basis.evaluate(pts, elements=elems), diff[elems])
        total += np.sum(w * np.sum(val ** 2, axis=-1))
    return float(np.sqrt(total))


# -- single solves ----------------------------------------------------------

@dataclass(eq=False)
class LevelResult:
    level: int
    mesh: Mesh
    V: FeSpace
    Q: FeSpace
    u: np.ndarray
    p: np.ndarray
    report: SolveReport
    errors: ErrorReport | None = None
    forms: object = None


def solve_on_mesh(
    mesh: Mesh,
    solution: ManufacturedSolution,
    params: DiscretizationParams,
    level: int = 1,
    errors: bool = True,
    coeffs=None,
) -> LevelResult:
    """Assemble, solve and (optionally) measure errors on one mesh."""
    V = build_velocity_space(mesh, params.k)
    Q = build_pressure_space(mesh, params.k - 1)
    forms = assemble_forms(V, Q, coeffs or solution.coefficients(), params)
    u, p, report = solve_saddle(forms, V, Q)
    err = compute_errors(V, Q, u, p, solution, params) if errors else None
    return LevelResult(level, mesh, V, Q, u, p, report, err, forms)


# -- convergence tables -----------------------------------------------------

ERROR_COLUMNS = ("energy", "l2u", "divu", "linfu", "l2p", "l2p_proj")


class StudyError(RuntimeError):
    """A level failed; ``table`` holds the levels completed so far."""

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


def rate(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float:
    """``log(e_i / e_{i+1}) / log(h_i / h_{i+1})``."""
    return float(np.log(e_coarse / e_fine) / np.log(h_coarse / h_fine))


@dataclass
class ConvergenceTable:
    levels: list = field(default_factory=list)
    h: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    header: str = ""

    def add(self, level: int, h: float, report: ErrorReport) -> None:
        self.levels.append(level)
        self.h.append(h)
        self.errors.append(report)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(e, name) for e in self.errors])

    def rates(self, name: str) -> list:
        """Rate between level i and i+1, stored on row i; the last row has none."""
        e, h = self.column(name), self.h
        out = []
        for i in range(len(e) - 1):
            if e[i] > 0 and e[i + 1] > 0:
                out.append(rate(e[i], e[i + 1], h[i], h[i + 1]))
            else:
                out.append(float("nan"))
        return out + [None] if len(e) else []

    def least_squares_rate(self, name: str, first_level: int | None = None) -> float:
        """Slope of ``log e`` against ``log h`` over the selected levels."""
        sel = [i for i, lv in enumerate(self.levels) if first_level is None or lv >= first_level]
        if len(sel) < 2:
            raise ValueError("need at least two levels for a rate")
        e = self.column(name)[sel]
        h = np.asarray(self.h)[sel]
        return float(np.polyfit(np.log(h), np.log(e), 1)[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.header:
            buf.write(self.header.rstrip("\n") + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        cols = ["level", "h"]
        for name in ERROR_COLUMNS:
            cols += [name, f"{name}_rate"]
        writer.writerow(cols)
        rates = {name: self.rates(name) for name in ERROR_COLUMNS}
        for i, lv in enumerate(self.levels):
            row = [lv, f"{self.h[i]:.6e}"]
            for name in ERROR_COLUMNS:
                r = rates[name][i]
                row += [f"{getattr(self.errors[i], name):.6e}", "" if r is None else f"{r:.4f}"]
            writer.writerow(row)
        return buf.getvalue()

    def format(self) -> str:
        """Fixed-width text rendering for terminals."""
        lines = ["level  h          " + "  ".join(f"{c:>10s} {'rate':>5s}" for c in ERROR_COLUMNS)]
        rates = {name: self.rates(name) for name in ERROR_COLUMNS}
        for i, lv in enumerate(self.levels):
            parts = []
            for name in ERROR_COLUMNS:
                r = rates[name][i]
                parts.append(f"{getattr(self.errors[i], name):10.3e} {'' if r is None else f'{r:5.2f}':>5s}")
            lines.append(f"{lv:<6d} {self.h[i]:<10.4e} " + "  ".join(parts))
        return "\n".join(lines)


def run_convergence_study(config: StudyConfig, on_level=None) -> ConvergenceTable:
    """Solve on ``config.levels`` nested meshes and tabulate errors and rates.

    ``on_level(result)`` is called after every level.  A failing level
    raises :class:`StudyError` carrying the partial table.
    """
    solution = config.solution()
    params = config.params()
    table = ConvergenceTable(header=config.header())
    for level, mesh in enumerate(config.meshes(), start=1):
        try:
            res = solve_on_mesh(mesh, solution, params, level)
        except Exception as exc:
            raise StudyError(f"level {level} failed: {exc}", table) from exc
        table.add(level, mesh.h, res.errors)
        log.info("level %d: h=%.4e energy=%.3e l2u=%.3e", level, mesh.h, res.errors.energy, res.errors.l2u)
        if on_level is not None:
            on_level(res)
    return table


# -- complex exactness ------------------------------------------------------

@dataclass
class ExactnessReport:
    dim_v: int
    dim_z: int
    dim_q: int
    rank_b: int
    rank_curl: int
    max_b_curl: float
    method: str
    rank_b_exact: bool = True
    rank_curl_exact: bool = True

    @property
    def div_onto(self) -> bool:
        """``img(div) = Q_h``."""
        return self.rank_b == self.dim_q

    @property
    def curl_onto_kernel(self) -> bool:
        """``img(curl) = ker(div)``."""
        return self.rank_curl == self.dim_v - self.dim_q and self.max_b_curl <= 1e-10

    @property
    def exact(self) -> bool:
        return self.div_onto and self.curl_onto_kernel and self.max_b_curl <= 1e-10

    def summary(self) -> str:
        return (
            f"dim V={self.dim_v} dim Z={self.dim_z} dim Q={self.dim_q} "
            f"rank B={self.rank_b} rank Curl={self.rank_curl} max|B Curl|={self.max_b_curl:.2e} "
            f"img(div)=Q:{self.div_onto} img(curl)=ker(div):{self.curl_onto_kernel} [{self.method}]"
        )


def _dense_rank(M) -> int:
    s = sla.svdvals(M.toarray() if sps.issparse(M) else M)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def _sparse_full_rank(M: sps.spmatrix, null: np.ndarray | None = None) -> bool:
    """Whether the wide matrix ``M`` has full row rank on the complement of ``null``.

    Compares the smallest singular value with ``RANK_RTOL`` times the
    largest one; a singular bordered factorization counts as deficient.
    """
    if M.shape[0] - (null is not None) > M.shape[1]:
        return False  # more rows than columns: deficient by counting
    smax = spla.svds(M.astype(float), k=1, return_singular_vectors=False, random_state=0)[0]
    eye = sps.identity(M.shape[1], format="csc")
    try:
        lam = schur_min_eigenvalue(M, eye, null)
    except RuntimeError:
        return False
    return bool(np.sqrt(max(lam, 0.0)) > RANK_RTOL * smax)


def check_complex_exactness(mesh: Mesh, k: int, drop_interior: bool = False) -> ExactnessReport:
    """Rank audit of ``Z_h --curl--> V_h --div--> Q_h`` with boundary constraints.

    Small problems use dense singular values; larger ones test full rank
    through the smallest singular value (Lanczos), in which case a
    deficient rank is reported as ``full - 1`` with ``rank_*_exact`` false.
    """
    V = build_velocity_space(mesh, k, drop_interior=drop_interior)
    Q = build_pressure_space(mesh, k - 1)
    Z = build_potential_space(mesh, k + 1)
    B = assemble_pressure_coupling(V, Q)
    Curl = curl_map(Z, V)
    dim_v, dim_z, dim_q = V.n_free, Z.n_free, Q.ndof - 1
    BC = B @ Curl
    max_bc = float(np.abs(BC.data).max()) if BC.nnz else 0.0
    if max(B.shape) <= DENSE_RANK_LIMIT and max(Curl.shape) <= DENSE_RANK_LIMIT:
        return ExactnessReport(dim_v, dim_z, dim_q, _dense_rank(B), _dense_rank(Curl), max_bc, "dense-svd")
    mean = pressure_mean_vector(Q)
    # constants are always in the left kernel of B (divergence theorem)
    scale = spla.norm(B) * np.linalg.norm(mean)
    left = float(np.abs(mean @ B).max()) if B.shape[1] else 0.0
    b_full = left <= 1e-10 * max(scale, 1.0) and _sparse_full_rank(B, mean)
    c_full = _sparse_full_rank(Curl.T.tocsr())
    return ExactnessReport(
        dim_v, dim_z, dim_q,
        dim_q if b_full else dim_q - 1,
        dim_z if c_full else dim_z - 1,
        max_bc, "lanczos", b_full, c_full,
    )


# -- inf-sup ---------------------------------------------------------------

def infsup_on_mesh(mesh: Mesh, k: int, method: str = "auto", drop_interior: bool = False) -> tuple[float, str, int, int]:
    V = build_velocity_space(mesh, k, drop_interior=drop_interior)
    Q = build_pressure_space(mesh, k - 1)
    beta, used = estimate_infsup(
        assemble_pressure_coupling(V, Q), broken_h1_gram(V), mean=pressure_mean_vector(Q), method=method,
    )
    return beta, used, V.n_free, Q.ndof - 1


def infsup_study(meshes: list[Mesh], k: int, method: str = "auto") -> InfSupReport:
    rep = InfSupReport([], [], [], [], [], [])
    for level, mesh in enumerate(meshes, start=1):
        beta, used, nv, npr = infsup_on_mesh(mesh, k, method)
        for lst, val in zip(
            (rep.levels, rep.h, rep.beta, rep.n_velocity, rep.n_pressure, rep.method),
            (level, mesh.h, beta, nv, npr, used),
        ):
            lst.append(val)
    return rep


# -- coercivity ------------------------------------------------------------

def coercivity_quotients(mesh: Mesh, solution: ManufacturedSolution, params: DiscretizationParams, samples: int = 100, seed: int = 0) -> np.ndarray:
    """``A(v, v) / |||v|||^2`` for random free velocity vectors."""
    coeffs = solution.coefficients()
    V = build_velocity_space(mesh, params.k)
    out = assemble_full(V, coeffs, params, ("D", "C", "R", "S", "K", "Jh", "Jb", "M"))
    n = V.ndof
    S = out.get("S", sps.csr_matrix((n, n)))
    A = coeffs.nu * out["D"] + out["C"] + out["R"] + S
    N = coeffs.nu * (out["K"] + params.penalty * out["Jh"]) + out["Jb"] + S + coeffs.r0 * out["M"]
    free = V.free
    A, N = A.tocsr()[free][:, free], N.tocsr()[free][:, free]
    rng = np.random.default_rng(seed)
    vs = rng.standard_normal((samples, len(free)))
    num = np.einsum("si,si->s", vs, (A @ vs.T).T)
    den = np.einsum("si,si->s", vs, (N @ vs.T).T)
    return num / den


# -- pressure robustness ---------------------------------------------------

@dataclass
class PressureRobustnessReport:
    velocity_change: float
    pressure_mismatch: float
    level: int


def pressure_robustness_test(config: StudyConfig, phi=None, level: int = 2) -> PressureRobustnessReport:
    """Solve with ``f`` and ``f + grad phi`` and compare.

    ``phi`` is a sympy expression in ``x, y`` (default ``cos(4 pi x)``).
    The velocity change should vanish and the pressure should absorb the
    projection of ``phi - mean(phi)``.
    """
    if phi is None:
        phi = sp.cos(4 * sp.pi * X)
    solution = config.solution()
    params = config.params()
    mesh = config.meshes(level)[-1]
    coeffs = solution.coefficients()
    gx = sp.lambdify((X, Y), sp.diff(phi, X), "numpy")
    gy = sp.lambdify((X, Y), sp.diff(phi, Y), "numpy")

    def f_shift(pts):
        x, y = pts[..., 0], pts[..., 1]
        g = np.stack([np.broadcast_to(gx(x, y), x.shape), np.broadcast_to(gy(x, y), x.shape)], axis=-1)
        return coeffs.f(pts) + g

    shifted = coeffs.with_force(f_shift, coeffs.curl_f)
    base = solve_on_mesh(mesh, solution, params, level, errors=False, coeffs=coeffs)
    moved = solve_on_mesh(mesh, solution, params, level, errors=False, coeffs=shifted)
    du = l2_difference(base.V, base.u, moved.u)
    phi_fn = sp.lambdify((X, Y), phi, "numpy")
    phi_mean = float(sp.integrate(phi, (X, 0, 1), (Y, 0, 1)))

    def phi_centered(pts):
        return np.broadcast_to(phi_fn(pts[..., 0], pts[..., 1]), pts.shape[:-1]) - phi_mean

    pi_phi = project_pressure(base.Q, phi_centered, params.volume_degree)
    # orthonormal pressure basis: coefficient norm is the L2 norm
    dp = float(np.linalg.norm(moved.p - base.p - pi_phi))
    return PressureRobustnessReport(du, dp, level)


# -- DOF bookkeeping -------------------------------------------------------

@dataclass(frozen=True)
class DofCounts:
    nv: int
    ne: int
    nt: int
    k: int
    stenberg: int
    bdm: int
    pressure: int

    @property
    def stenberg_total(self) -> int:
        return self.stenberg + self.pressure

    @property
    def bdm_total(self) -> int:
        return self.bdm + self.pressure

    @property
    def ratio(self) -> float:
        return self.stenberg / self.bdm


def dof_comparison(nv: int, ne: int, nt: int, k: int) -> DofCounts:
    """Raw DOF counts of Stenberg_k and BDM_k velocities with DG_{k-1} pressure."""
    if min(nv, ne, nt) < 0 or k < 2:
        raise ValueError("counts must be nonnegative and k >= 2")
    return DofCounts(
        nv, ne, nt, k,
        stenberg=velocity_dof_count(nv, ne, nt, k),
        bdm=(k + 1) * ne + (k - 1) * (k + 1) * nt,
        pressure=dim_poly(k - 1) * nt,
    )


def mesh_dof_table(config: StudyConfig) -> list[DofCounts]:
    return [dof_comparison(m.nv, m.ne, m.nt, config.k) for m in config.meshes()]


def central_flux_comparison(config: StudyConfig, level: int = 1) -> dict:
    """L-infinity velocity errors of upwind and central convection at one level."""
    solution = config.solution()
    mesh = config.meshes(level)[-1]
    out = {}
    for scheme in ("upwind", "central"):
        params = replace(config, convection=scheme).params()
        out[scheme] = solve_on_mesh(mesh, solution, params, level).errors.linfu
    return out


__all__ = [
    "StudyConfig",
    "ErrorReport",
    "compute_errors",
    "ConvergenceTable",
    "run_convergence_study",
    "ExactnessReport",
    "check_complex_exactness",
    "infsup_study",
    "coercivity_quotients",
    "pressure_robustness_test",
    "dof_comparison",
    "central_flux_comparison",
    "mesh_metrics",
]
