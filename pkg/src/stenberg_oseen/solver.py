"""Saddle point solve and discrete inf-sup estimation.

The discrete problem is

    [ A   B^T  0 ] [u]   [G    ]
    [ B   0    m ] [p] = [G_div]
    [ 0   m^T  0 ] [l]   [0    ]

where ``m_j = (q_j, 1)`` pins the pressure mean to zero.  It is solved
with a sparse LU factorization (SuperLU); tiny systems go through a dense
solve.  Large systems can instead be solved through the stream function
space: since ``ker B = Curl Z_h``, the velocity is ``u0 + Curl z`` with
``u0`` in the range of ``B^T``, which needs far less fill than the bordered
factorization.  Either way the residual is checked on the bordered system.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .fe_space import FeSpace, build_potential_space, pressure_mean_vector
from .forms import curl_map

log = logging.getLogger(__name__)

DENSE_LIMIT = 3000
RESIDUAL_TOL = 1e-10
INFSUP_DENSE_LIMIT = 5000
BORDERED_LIMIT = 20000
SOLVE_METHODS = ("auto", "bordered", "potential")


class SolverError(RuntimeError):
    """Raised when the linear solve fails or leaves a large residual."""


@dataclass(eq=False)
class SaddleSystem:
    matrix: sps.csr_matrix
    rhs: np.ndarray
    n_velocity: int
    n_pressure: int

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass
class SolveReport:
    n_unknowns: int
    nnz: int
    residual: float
    lagrange_multiplier: float
    seconds: float
    method: str


def build_saddle_system(A, B, G, G_div, mean: np.ndarray) -> SaddleSystem:
    """Block matrix with the mean-value multiplier as the last unknown."""
    nu, npr = A.shape[0], B.shape[0]
    m = sps.csr_matrix(np.asarray(mean).reshape(-1, 1))
    K = sps.bmat([[A, B.T, None], [B, None, m], [None, m.T, None]], format="csc")
    rhs = np.concatenate([G, G_div, [0.0]])
    return SaddleSystem(K, rhs, nu, npr)


def _residual(K, x, rhs) -> float:
    r = K @ x - rhs
    return float(np.abs(r).max() / max(np.abs(rhs).max(), 1.0))


def solve_system(system: SaddleSystem, tol: float = RESIDUAL_TOL) -> tuple[np.ndarray, SolveReport]:
    """Direct solve with a scaled max-norm residual check."""
    t0 = time.perf_counter()
    K = system.matrix
    if system.size <= DENSE_LIMIT:
        try:
            x = sla.solve(K.toarray(), system.rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"dense factorization failed: {exc}") from exc
        method = "dense-lu"
    else:
        try:
            lu = spla.splu(K.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"sparse factorization failed: {exc}") from exc
        x = lu.solve(system.rhs)
        method = "superlu"
        # one step of iterative refinement
        x = x + lu.solve(system.rhs - K @ x)
    if not np.all(np.isfinite(x)):
        raise SolverError("solution contains non-finite values")
    res = _residual(K, x, system.rhs)
    seconds = time.perf_counter() - t0
    log.info("solved %d unknowns (%s) in %.2fs, residual %.2e", system.size, method, seconds, res)
    if res > tol:
        raise SolverError(f"relative residual {res:.3e} exceeds tolerance {tol:.1e}")
    report = SolveReport(system.size, K.nnz, res, float(x[-1]), seconds, method)
    return x, report


class _PotentialSolver:
    """Exact solver for the bordered system through ``Z_h``.

    Factorizes ``Curl^T A Curl`` and ``B B^T`` grounded at one pressure DOF;
    valid when ``ker B = range(Curl)`` on the free velocity DOFs and
    ``ker B^T`` is spanned by ``m``.
    """

    def __init__(self, A, B, mean, Curl):
        self.A, self.B, self.C = A.tocsr(), B.tocsr(), Curl.tocsr()
        self.m = np.asarray(mean, dtype=float)
        self.mm = float(self.m @ self.m)
        self.j0 = int(np.argmax(np.abs(self.m)))
        keep = np.ones(self.B.shape[0])
        keep[self.j0] = 0.0
        D = sps.diags(keep)
        BBt = (D @ (self.B @ self.B.T) @ D + sps.diags(1.0 - keep)).tocsc()
        Z = (self.C.T @ self.A @ self.C).tocsc()
        try:
            self.lu_b = spla.splu(BBt, permc_spec="COLAMD")
            del BBt
            # positive definite symmetric part: a symmetric ordering keeps fill low
            self.lu_z = spla.splu(Z, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                  options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise SolverError(f"sparse factorization failed: {exc}") from exc

    def solve(self, rhs):
        nu, npr = self.A.shape[0], self.B.shape[0]
        g, gdiv, gm = rhs[:nu], rhs[nu:nu + npr], rhs[-1]
        lam = (self.m @ gdiv) / self.mm
        u = self.B.T @ self._bbt_solve(gdiv - lam * self.m)
        u = u + self.C @ self.lu_z.solve(self.C.T @ (g - self.A @ u))
        # G - A u is orthogonal to ker B, hence equal to B^T p
        r = self.B @ (g - self.A @ u)
        p = self._bbt_solve(r - (self.m @ r) / self.mm * self.m) + gm * self.m / self.mm
        return np.concatenate([u, p, [lam]])

    def _bbt_solve(self, r):
        """Zero-mean solution of ``B B^T y = r`` for ``r`` orthogonal to ``m``."""
        r = r.copy()
        r[self.j0] = 0.0
        y = self.lu_b.solve(r)
        return y - (self.m @ y) / self.mm * self.m


def solve_potential(system: SaddleSystem, Curl, mean, tol: float = RESIDUAL_TOL) -> tuple[np.ndarray, SolveReport]:
    """Solve the bordered system through the stream function space."""
    t0 = time.perf_counter()
    nu, npr = system.n_velocity, system.n_pressure
    K = system.matrix.tocsr()
    A, B = K[:nu, :nu], K[nu:nu + npr, :nu]
    solver = _PotentialSolver(A, B, mean, Curl)
    x = solver.solve(system.rhs)
    x = x + solver.solve(system.rhs - K @ x)
    if not np.all(np.isfinite(x)):
        raise SolverError("solution contains non-finite values")
    res = _residual(K, x, system.rhs)
    seconds = time.perf_counter() - t0
    log.info("solved %d unknowns (potential) in %.2fs, residual %.2e", system.size, seconds, res)
    if res > tol:
        raise SolverError(f"relative residual {res:.3e} exceeds tolerance {tol:.1e}")
    return x, SolveReport(system.size, K.nnz, res, float(x[-1]), seconds, "potential-superlu")


def solve_saddle(forms, V: FeSpace, Q: FeSpace, tol: float = RESIDUAL_TOL, method: str = "auto"):
    """Solve the assembled scheme.

    ``method`` is ``"bordered"`` (LU of the bordered system), ``"potential"``
    (reduction to the stream function space) or ``"auto"``, which picks the
    bordered solve up to ``BORDERED_LIMIT`` unknowns.  Returns the full
    velocity coefficient vector (constrained DOFs set to the boundary data),
    the pressure coefficients and a :class:`SolveReport`.
    """
    if method not in SOLVE_METHODS:
        raise ValueError(f"unknown solve method {method!r}; expected one of {SOLVE_METHODS}")
    mean = pressure_mean_vector(Q)
    system = build_saddle_system(forms.A, forms.B, forms.G, forms.G_div, mean)
    if method == "auto":
        method = "bordered" if system.size <= BORDERED_LIMIT else "potential"
    if method == "bordered":
        x, report = solve_system(system, tol)
    else:
        Z = build_potential_space(V.mesh, V.order + 1)
        x, report = solve_potential(system, curl_map(Z, V), mean, tol)
    u = V.embed(x[:V.n_free], forms.dirichlet_values)
    p = x[V.n_free:V.n_free + Q.ndof]
    return u, p, report


@dataclass
class InfSupReport:
    """Discrete inf-sup constants per mesh, in the ``|.|_{1,h}`` velocity norm."""

    levels: list
    h: list
    beta: list
    n_velocity: list
    n_pressure: list
    method: list

    @property
    def ratio(self) -> float:
        return float(max(self.beta) / min(self.beta))

    def rows(self):
        return list(zip(self.levels, self.h, self.n_velocity, self.n_pressure, self.beta, self.method))


def _infsup_dense(B, M1, Mp, mean):
    npr = B.shape[0]
    Bd = B.toarray()
    c = sla.cho_factor(M1.toarray())
    S = Bd @ sla.cho_solve(c, Bd.T)
    Mpd = np.eye(npr) if Mp is None else Mp.toarray()
    if mean is not None:
        # orthonormal basis of the complement of the constants
        w = np.asarray(mean, dtype=float)
        Qb = sla.null_space((w / np.linalg.norm(w))[None, :])
        S = Qb.T @ S @ Qb
        Mpd = Qb.T @ Mpd @ Qb
    S = 0.5 * (S + S.T)
    return float(sla.eigh(S, Mpd, eigvals_only=True, subset_by_index=[0, 0])[0])


def schur_min_eigenvalue(B: sps.spmatrix, M1: sps.spmatrix, mean: np.ndarray | None = None, tol: float = 1e-10) -> float:
    """Smallest eigenvalue of ``B M1^{-1} B^T`` on the complement of ``mean``.

    Lanczos iteration on the inverse Schur complement; ``S^{-1} r`` is
    applied through one sparse factorization of the bordered system
    ``[[M1, B^T, 0], [B, 0, m], [0, m^T, 0]]`` (no border when ``mean`` is
    None).  Raises ``RuntimeError`` when that system is singular, which
    happens exactly when ``B`` loses rank on the complement.
    """
    nv, npr = B.shape[1], B.shape[0]
    if mean is None:
        mhat = np.zeros(npr)
        K = sps.bmat([[M1, B.T], [B, None]], format="csc")
        extra = []
    else:
        m = np.asarray(mean, dtype=float)
        mhat = m / np.linalg.norm(m)
        mcol = sps.csr_matrix(m.reshape(-1, 1))
        K = sps.bmat([[M1, B.T, None], [B, None, mcol], [None, mcol.T, None]], format="csc")
        extra = [0.0]
    lu = spla.splu(K, permc_spec="COLAMD")

    def apply(r):
        r = np.ravel(r)
        r = r - mhat * (mhat @ r)
        x = lu.solve(np.concatenate([np.zeros(nv), r, extra]))
        q = -x[nv:nv + npr]
        return q - mhat * (mhat @ q)

    if npr == 1 and mean is None:
        return float(1.0 / apply(np.ones(1))[0])
    op = spla.LinearOperator((npr, npr), matvec=apply, dtype=float)
    v0 = np.random.default_rng(0).standard_normal(npr)
    v0 -= mhat * (mhat @ v0)
    mu = spla.eigsh(op, k=1, which="LA", v0=v0, tol=tol, return_eigenvectors=False)[0]
    return float(1.0 / mu)


def estimate_infsup(
    B: sps.spmatrix,
    M1: sps.spmatrix,
    Mp: sps.spmatrix | None = None,
    mean: np.ndarray | None = None,
    method: str = "auto",
    tol: float = 1e-10,
) -> tuple[float, str]:
    """Smallest singular value of ``B`` between ``(V, M1)`` and zero-mean ``(Q, Mp)``.

    Solves ``B M1^{-1} B^T q = lambda Mp q`` on the complement of the
    constants and returns ``(sqrt(lambda_min), method)``.  The dense
    eigensolver is used up to ``INFSUP_DENSE_LIMIT`` velocity DOFs; larger
    problems use Lanczos iteration on the inverse Schur complement, which
    assumes an orthonormal pressure basis (``Mp`` the identity).
    """
    nv = B.shape[1]
    if method == "auto":
        method = "dense" if nv <= INFSUP_DENSE_LIMIT else "lanczos"
    if method == "dense":
        if nv > INFSUP_DENSE_LIMIT:
            raise ValueError(f"dense inf-sup estimate limited to {INFSUP_DENSE_LIMIT} velocity DOFs, got {nv}")
        lam = _infsup_dense(B, M1, Mp, mean)
    elif method == "lanczos":
        if Mp is not None or mean is None:
            raise ValueError("the Lanczos inf-sup path needs an orthonormal pressure basis and the mean vector")
        lam = schur_min_eigenvalue(B, M1, mean, tol)
    else:
        raise ValueError(f"unknown inf-sup method {method!r}")
    return float(np.sqrt(max(lam, 0.0))), method
