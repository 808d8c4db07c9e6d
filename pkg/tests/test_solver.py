import numpy as np
import pytest
import scipy.sparse as sps

from stenberg_oseen.analysis import compute_errors, interpolate_exact, solve_on_mesh
from stenberg_oseen.fe_space import build_potential_space, build_pressure_space, build_velocity_space, pressure_mean_vector
from stenberg_oseen.forms import DiscretizationParams, assemble_forms, assemble_pressure_coupling, broken_h1_gram, curl_map
from stenberg_oseen.mesh import build_structured_mesh, refine_uniform
from stenberg_oseen.problem import benchmark_solution, polynomial_solution
from stenberg_oseen.solver import (
    SaddleSystem,
    SolverError,
    build_saddle_system,
    estimate_infsup,
    schur_min_eigenvalue,
    solve_potential,
    solve_saddle,
    solve_system,
)


@pytest.fixture(scope="module")
def mesh():
    return build_structured_mesh(4, 0.2, seed=0)


@pytest.mark.parametrize("k", [2, 3])
@pytest.mark.parametrize("nu", [1e-6, 1.0])
def test_polynomial_solution_is_reproduced(mesh, k, nu):
    sol = polynomial_solution(k, nu)
    params = DiscretizationParams(k=k)
    res = solve_on_mesh(mesh, sol, params)
    e = res.errors
    for name in ("energy", "l2u", "divu", "linfu", "l2p", "l2p_proj"):
        assert getattr(e, name) <= 1e-9, (name, getattr(e, name))
    assert res.report.residual <= 1e-10


def test_interpolant_satisfies_discrete_equations(mesh):
    sol = polynomial_solution(2, 1e-2)
    params = DiscretizationParams()
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    F = assemble_forms(V, Q, sol.coefficients(), params)
    u, p = interpolate_exact(V, Q, sol, params)
    r = F.A @ u[V.free] + F.B.T @ p - F.G
    assert np.abs(r).max() <= 1e-9 * max(1.0, np.abs(F.G).max())
    assert np.abs(F.B @ u[V.free] - F.G_div).max() <= 1e-11


def test_benchmark_solution_properties(mesh):
    sol = benchmark_solution(1e-6)
    res = solve_on_mesh(mesh, sol, DiscretizationParams())
    assert pressure_mean_vector(res.Q) @ res.p == pytest.approx(0.0, abs=1e-12)
    assert res.errors.divu <= 1e-8
    assert abs(res.report.lagrange_multiplier) <= 1e-8
    # the constrained DOFs carry the boundary data
    assert np.array_equal(res.u[res.V.constrained], res.forms.dirichlet_values)


def test_sparse_and_dense_paths_agree(mesh, monkeypatch):
    import stenberg_oseen.solver as solver

    sol = benchmark_solution(1e-2)
    params = DiscretizationParams()
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    F = assemble_forms(V, Q, sol.coefficients(), params)
    u1, p1, r1 = solve_saddle(F, V, Q)
    monkeypatch.setattr(solver, "DENSE_LIMIT", 0)
    u2, p2, r2 = solve_saddle(F, V, Q)
    assert (r1.method, r2.method) == ("dense-lu", "superlu")
    assert np.allclose(u1, u2, atol=1e-11) and np.allclose(p1, p2, atol=1e-10)


def test_saddle_layout():
    A = sps.identity(3, format="csr")
    B = sps.csr_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]]))
    S = build_saddle_system(A, B, np.ones(3), np.zeros(2), np.array([1.0, 1.0]))
    assert isinstance(S, SaddleSystem) and S.size == 6
    K = S.matrix.toarray()
    assert np.allclose(K, K.T)
    assert np.allclose(K[3:5, 5], 1.0) and K[5, 5] == 0.0
    x, rep = solve_system(S)
    assert rep.residual <= 1e-14
    assert x[3] + x[4] == pytest.approx(0.0, abs=1e-14)


def test_singular_system_raises():
    A = sps.csr_matrix((3, 3))
    B = sps.csr_matrix((1, 3))
    S = build_saddle_system(A, B, np.ones(3), np.zeros(1), np.ones(1))
    with pytest.raises(SolverError):
        solve_system(S)


def test_residual_tolerance_enforced():
    A = sps.identity(2, format="csr")
    B = sps.csr_matrix(np.array([[1.0, -1.0]]))
    S = build_saddle_system(A, B, np.ones(2), np.zeros(1), np.ones(1))
    with pytest.raises(SolverError, match="residual"):
        solve_system(S, tol=-1.0)


def test_infsup_dense_and_lanczos_agree(mesh):
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    B = assemble_pressure_coupling(V, Q)
    M1 = broken_h1_gram(V)
    m = pressure_mean_vector(Q)
    bd, md = estimate_infsup(B, M1, mean=m, method="dense")
    bl, ml = estimate_infsup(B, M1, mean=m, method="lanczos")
    assert (md, ml) == ("dense", "lanczos")
    assert bd > 0.05
    assert bl == pytest.approx(bd, rel=1e-7)


def test_infsup_rank_deficient_detected(mesh):
    V = build_velocity_space(mesh, 2, drop_interior=True)
    Q = build_pressure_space(mesh, 1)
    B = assemble_pressure_coupling(V, Q)
    m = pressure_mean_vector(Q)
    beta, _ = estimate_infsup(B, broken_h1_gram(V), mean=m, method="dense")
    assert beta < 1e-6
    with pytest.raises(RuntimeError):
        schur_min_eigenvalue(B, broken_h1_gram(V), m)


def test_infsup_method_validation(mesh):
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    B = assemble_pressure_coupling(V, Q)
    with pytest.raises(ValueError):
        estimate_infsup(B, broken_h1_gram(V), method="magic")
    with pytest.raises(ValueError):
        estimate_infsup(B, broken_h1_gram(V), method="lanczos")


@pytest.mark.parametrize("nu", [1e-6, 1.0])
def test_potential_and_bordered_paths_agree(mesh, nu):
    sol = benchmark_solution(nu)
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    F = assemble_forms(V, Q, sol.coefficients(), DiscretizationParams())
    u1, p1, r1 = solve_saddle(F, V, Q, method="bordered")
    u2, p2, r2 = solve_saddle(F, V, Q, method="potential")
    assert r2.method == "potential-superlu"
    assert r2.residual <= 1e-10
    assert np.abs(u1 - u2).max() <= 1e-10 * np.abs(u1).max()
    assert np.abs(p1 - p2).max() <= 1e-10 * np.abs(p1).max()
    assert r2.lagrange_multiplier == pytest.approx(r1.lagrange_multiplier, abs=1e-10)


def test_potential_path_with_nonzero_multiplier(mesh):
    # inconsistent divergence data: the multiplier absorbs the mean
    sol = polynomial_solution(2, 1.0)
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    F = assemble_forms(V, Q, sol.coefficients(), DiscretizationParams())
    m = pressure_mean_vector(Q)
    system = build_saddle_system(F.A, F.B, F.G, F.G_div + 0.3 * m, m)
    x_ref, _ = solve_system(system)
    x, rep = solve_potential(system, curl_map(build_potential_space(mesh, 3), V), m)
    assert x[-1] == pytest.approx(0.3, rel=1e-10)
    assert np.abs(x - x_ref).max() <= 1e-9 * np.abs(x_ref).max()


def test_unknown_solve_method(mesh):
    sol = polynomial_solution(2, 1.0)
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    F = assemble_forms(V, Q, sol.coefficients(), DiscretizationParams())
    with pytest.raises(ValueError, match="unknown solve method"):
        solve_saddle(F, V, Q, method="gmres")
