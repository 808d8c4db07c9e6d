import numpy as np
import pytest
import scipy.sparse as sps

from stenberg_oseen.fe_space import (
    build_potential_space,
    build_pressure_space,
    build_velocity_space,
    interpolate,
    pressure_mean_vector,
)
from stenberg_oseen.forms import (
    DiscretizationParams,
    assemble_convection,
    assemble_diffusion,
    assemble_forms,
    assemble_pressure_coupling,
    assemble_reaction,
    assemble_rhs,
    assemble_vorticity_stab,
    compute_tau,
    curl_map,
    triple_norm,
)
from stenberg_oseen.mesh import Mesh, build_structured_mesh
from stenberg_oseen.problem import OseenCoefficients, benchmark_solution


def const_field(v):
    v = np.asarray(v, dtype=float)
    return lambda p: np.broadcast_to(v, np.shape(p)[:-1] + v.shape).copy()


def coefficients(b=(1.0, 0.0), c=1.0, nu=1e-6, f=(0.0, 0.0), curl_f=0.0, grad_b=None):
    zero_grad = const_field(np.zeros((2, 2)))
    return OseenCoefficients(
        nu=nu, b=b if callable(b) else const_field(b), grad_b=grad_b or zero_grad,
        c=const_field(c), grad_c=const_field(np.zeros(2)),
        f=f if callable(f) else const_field(f), curl_f=const_field(curl_f), r0=1.0,
    )


def affine_b():
    b = lambda p: np.stack([0.7 + 0.3 * p[..., 1], -0.4 + 0.2 * p[..., 0]], axis=-1)
    gb = const_field([[0.0, 0.3], [0.2, 0.0]])
    return b, gb


@pytest.fixture(scope="module")
def unit():
    return build_structured_mesh(1)


@pytest.fixture(scope="module")
def mesh():
    return build_structured_mesh(4, 0.2, seed=2)


def reference_triangle():
    return Mesh.from_arrays(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


# -- diffusion ----------------------------------------------------------------

def test_diffusion_symmetric(mesh):
    D = assemble_diffusion(build_velocity_space(mesh, 2), DiscretizationParams(), full=True)
    assert abs(D - D.T).max() <= 1e-12 * abs(D).max()


def test_diffusion_linear_field_hand_value(unit):
    # |grad v|^2 = 1, consistency/symmetry give -2 on x = 1, penalty 36 (1 + 1/3 + 1/3)
    V = build_velocity_space(unit, 2)
    v = interpolate(V, lambda p: np.stack([p[..., 0], 0 * p[..., 0]], -1))
    D = assemble_diffusion(V, DiscretizationParams(), full=True)
    assert v @ D @ v == pytest.approx(1 - 2 + 36 * (1 + 2 / 3), rel=1e-12)


def test_diffusion_constant_sees_only_boundary_penalty(unit, mesh):
    for m in (unit, mesh):
        V = build_velocity_space(m, 2)
        v = interpolate(V, const_field([1.0, 2.0]))
        D = assemble_diffusion(V, DiscretizationParams(), full=True)
        # each boundary facet contributes sigma / h_F * |F| * |c|^2 with h_F = |F|
        assert v @ D @ v == pytest.approx(36 * len(m.boundary_facets) * 5, rel=1e-12)


# -- convection ----------------------------------------------------------------

def test_convection_zero_field(mesh):
    C = assemble_convection(build_velocity_space(mesh, 2), coefficients(b=(0.0, 0.0)), DiscretizationParams(), full=True)
    assert abs(C).max() == 0.0


def test_convection_inflow_hand_value(unit, mesh):
    for m in (unit, mesh):
        V = build_velocity_space(m, 2)
        v = interpolate(V, const_field([1.0, 1.0]))
        C = assemble_convection(V, coefficients(b=(1.0, 0.0)), DiscretizationParams(), full=True)
        assert v @ C @ v == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("scheme", ["upwind", "central"])
def test_convection_symmetric_part_psd(mesh, scheme):
    b, gb = affine_b()
    V = build_velocity_space(mesh, 2)
    C = assemble_convection(V, coefficients(b=b, grad_b=gb), DiscretizationParams(convection=scheme)).toarray()
    ev = np.linalg.eigvalsh(C + C.T)
    assert ev.min() >= -1e-10 * np.abs(ev).max()
    rng = np.random.default_rng(1)
    for v in rng.standard_normal((100, V.n_free)):
        assert v @ C @ v >= -1e-10 * (v @ v)


def test_upwind_adds_jump_penalty(mesh):
    b, gb = affine_b()
    V = build_velocity_space(mesh, 2)
    co = coefficients(b=b, grad_b=gb)
    up = assemble_convection(V, co, DiscretizationParams(convection="upwind"))
    ce = assemble_convection(V, co, DiscretizationParams(convection="central"))
    J = (up - ce).toarray()
    assert np.allclose(J, J.T, atol=1e-12)
    assert np.linalg.eigvalsh(J).min() >= -1e-12 and np.abs(J).max() > 0


# -- reaction ----------------------------------------------------------------

def test_reaction_mass_and_zero(mesh):
    V = build_velocity_space(mesh, 2)
    R = assemble_reaction(V, coefficients(c=1.0), full=True)
    v = interpolate(V, lambda p: np.stack([p[..., 0], p[..., 1] ** 2], -1))
    assert v @ R @ v == pytest.approx(1 / 3 + 1 / 5, rel=1e-12)
    assert abs(R - R.T).max() <= 1e-14
    assert abs(assemble_reaction(V, coefficients(c=0.0), full=True)).max() == 0.0


# -- stabilization -------------------------------------------------------------

def test_tau_examples():
    m = Mesh.from_arrays(np.array([[0.0, 0.0], [0.1, 0.0], [0.05, 0.05]]), np.array([[0, 1, 2]]))
    assert m.diameters[0] == pytest.approx(0.1)
    p = DiscretizationParams()
    assert compute_tau(m, coefficients(nu=1e-6), p, b_inf=2.0)[0] == pytest.approx(5e-4)
    assert compute_tau(m, coefficients(nu=1.0), p, b_inf=2.0)[0] == pytest.approx(1e-4)
    with pytest.raises(ValueError):
        compute_tau(m, coefficients(b=(0.0, 0.0)), p)


def test_tau_monotone_in_h():
    b, gb = affine_b()
    m = build_structured_mesh(5, 0.25, 3)
    t = compute_tau(m, coefficients(b=b, grad_b=gb, nu=1e-2), DiscretizationParams())
    order = np.argsort(m.diameters)
    assert np.all(np.diff(t[order]) >= 0)


def test_vorticity_reference_element_hand_value():
    m = reference_triangle()
    V = build_velocity_space(m, 2)
    v = interpolate(V, lambda p: np.stack([0 * p[..., 0], p[..., 0] ** 2], -1))
    delta0 = 0.1
    S = assemble_vorticity_stab(V, coefficients(b=(1.0, 0.0), c=0.0), DiscretizationParams(delta0=delta0), full=True)
    tau = np.sqrt(2) ** 3  # b_inf = 1, h_K = sqrt 2
    volume = tau * 4 * 0.5
    facet = 2 * (2 * np.sqrt(2) / 3)  # h_F^2 * int (2x n_1)^2 on the hypotenuse
    assert v @ S @ v == pytest.approx(delta0 * (volume + facet), rel=1e-12)


def test_vorticity_constant_field_is_in_kernel(mesh):
    V = build_velocity_space(mesh, 2)
    S = assemble_vorticity_stab(V, coefficients(b=(0.6, -0.3), c=0.0), DiscretizationParams(delta0=1.0), full=True)
    v = interpolate(V, const_field([1.0, -2.0]))
    assert np.abs(S @ v).max() <= 1e-12 * abs(S).max()


def test_vorticity_polynomial_has_no_interior_jumps(mesh):
    from stenberg_oseen.quadrature import edge_rule

    V = build_velocity_space(mesh, 2)
    bx, by = 0.6, -0.3
    co = coefficients(b=(bx, by), c=0.0)
    v = interpolate(V, lambda p: np.stack([p[..., 1] ** 2, p[..., 0] * p[..., 1]], -1))
    params = DiscretizationParams(delta0=1.0)
    S = assemble_vorticity_stab(V, co, params, full=True)
    # (b.grad) v = (2 by y, bx y + by x), so curl L v = -by on every element
    volume = np.sum(compute_tau(mesh, co, params) * mesh.areas) * by ** 2
    # interior jumps vanish; boundary facets see the one-sided trace
    r = edge_rule(6)
    facet = 0.0
    for f in mesh.boundary_facets:
        a, b = mesh.vertices[mesh.facets[f]]
        n = mesh.facet_normals[f]
        pts = a + r.points[:, None] * (b - a)
        w = np.stack([2 * by * pts[:, 1], bx * pts[:, 1] + by * pts[:, 0]], -1)
        L = np.linalg.norm(b - a)
        facet += L ** 2 * L * r.weights @ (w[:, 0] * n[1] - w[:, 1] * n[0]) ** 2
    assert v @ S @ v == pytest.approx(volume + facet, rel=1e-10)


def test_vorticity_psd(mesh):
    b, gb = affine_b()
    S = assemble_vorticity_stab(build_velocity_space(mesh, 2), coefficients(b=b, grad_b=gb), DiscretizationParams(delta0=1.0)).toarray()
    assert np.allclose(S, S.T, atol=1e-12 * np.abs(S).max())
    assert np.linalg.eigvalsh(S).min() >= -1e-10 * np.abs(S).max()


def test_vorticity_needs_derivatives(mesh):
    co = coefficients()
    co = OseenCoefficients(co.nu, co.b, None, co.c, co.grad_c, co.f, co.curl_f, 1.0)
    with pytest.raises(ValueError):
        assemble_vorticity_stab(build_velocity_space(mesh, 2), co, DiscretizationParams())


# -- pressure coupling -----------------------------------------------------------

def test_pressure_coupling_entry(mesh):
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    v = interpolate(V, lambda p: np.stack([p[..., 0], 0 * p[..., 0]], -1))
    Bv = assemble_pressure_coupling(V, Q, full=True) @ v
    first = Q.element_dofs[:, 0]
    assert np.allclose(Bv[first], -np.sqrt(mesh.areas), rtol=1e-12)
    assert np.allclose(np.delete(Bv, first), 0.0, atol=1e-12)


@pytest.mark.parametrize("k", [2, 3])
def test_div_curl_vanishes(mesh, k):
    V = build_velocity_space(mesh, k)
    Q = build_pressure_space(mesh, k - 1)
    Z = build_potential_space(mesh, k + 1)
    BC = assemble_pressure_coupling(V, Q) @ curl_map(Z, V)
    assert abs(BC).max() <= 1e-10


def test_curl_map_matches_pointwise_curl(mesh):
    V = build_velocity_space(mesh, 2)
    Z = build_potential_space(mesh, 3)
    z = np.random.default_rng(5).standard_normal(Z.ndof)
    u = curl_map(Z, V, free=False) @ z
    pts = mesh.element_centroids()[:, None, :] + 0.01
    cz = np.stack([Z.evaluate(z, pts, 0, 1), -Z.evaluate(z, pts, 1, 0)], -1)
    assert np.allclose(V.evaluate(u, pts), cz, atol=1e-9 * np.abs(cz).max())


def test_curl_map_rejects_other_mesh(mesh):
    with pytest.raises(ValueError):
        curl_map(build_potential_space(build_structured_mesh(2), 3), build_velocity_space(mesh, 2))


def test_constant_pressure_is_orthogonal_to_free_divergence(mesh):
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    m = pressure_mean_vector(Q)
    assert np.abs(m @ assemble_pressure_coupling(V, Q)).max() <= 1e-12


# -- right-hand side ------------------------------------------------------------

def test_rhs_gradient_force_skips_stabilization(mesh):
    V = build_velocity_space(mesh, 2)
    f = lambda p: np.stack([np.cos(p[..., 0]) * p[..., 1], np.sin(p[..., 0])], -1)  # grad(y sin x)
    co = coefficients(f=f)
    on = assemble_rhs(V, co, DiscretizationParams(delta0=1.0))
    off = assemble_rhs(V, co, DiscretizationParams(vorticity_stab=False))
    assert np.allclose(on, off, rtol=0, atol=1e-15)


def test_rhs_constant_force_single_element():
    m = reference_triangle()
    V = build_velocity_space(m, 2)
    v = interpolate(V, const_field([1.0, 0.0]))
    G = assemble_rhs(V, coefficients(f=(1.0, 0.0)), DiscretizationParams(vorticity_stab=False))
    assert G @ v == pytest.approx(0.5, rel=1e-13)


def test_rhs_deterministic_bitwise():
    m = build_structured_mesh(12, 0.2, 0)
    V = build_velocity_space(m, 2)
    co = benchmark_solution(1e-6).coefficients()
    a = assemble_rhs(V, co, DiscretizationParams())
    b = assemble_rhs(V, co, DiscretizationParams())
    assert np.all(np.isfinite(a)) and a.tobytes() == b.tobytes()


def test_rhs_needs_curl_f(mesh):
    co = coefficients()
    co = OseenCoefficients(co.nu, co.b, co.grad_b, co.c, co.grad_c, co.f, None, 1.0)
    with pytest.raises(ValueError):
        assemble_rhs(build_velocity_space(mesh, 2), co, DiscretizationParams())


# -- assembled system -------------------------------------------------------------

def test_assembled_operator_coercive(mesh):
    sol = benchmark_solution(1e-6)
    co = sol.coefficients()
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    p = DiscretizationParams()
    F = assemble_forms(V, Q, co, p)
    A = F.A.toarray()
    v = np.random.default_rng(4).standard_normal(V.n_free)
    full = V.embed(v)
    assert v @ A @ v >= 0.49 * triple_norm(V, co, p, full) ** 2
    assert F.B.shape == (Q.ndof, V.n_free)
    assert sps.issparse(F.A)


def test_triple_norm_rejects_wrong_length(mesh):
    V = build_velocity_space(mesh, 2)
    with pytest.raises(ValueError):
        triple_norm(V, coefficients(), DiscretizationParams(), np.zeros(3))
