import csv
import io

import numpy as np
import pytest

from stenberg_oseen.analysis import (
    ConvergenceTable,
    ErrorReport,
    StudyConfig,
    StudyError,
    check_complex_exactness,
    coercivity_quotients,
    compute_errors,
    dof_comparison,
    infsup_study,
    interpolate_exact,
    mesh_dof_table,
    pressure_robustness_test,
    rate,
    run_convergence_study,
    solve_on_mesh,
)
from stenberg_oseen.fe_space import build_pressure_space, build_velocity_space
from stenberg_oseen.forms import DiscretizationParams
from stenberg_oseen.mesh import build_structured_mesh, write_mesh
from stenberg_oseen.problem import benchmark_solution, polynomial_solution


def report(e):
    return ErrorReport(e, True, e, 0.0, e, e, e)


def test_rate_reference_value():
    assert rate(8.95e-3, 2.14e-3, 1.0, 0.5) == pytest.approx(2.064, abs=1e-3)


def test_table_rates_and_csv():
    t = ConvergenceTable(header="# config: {}")
    for lv, (h, e) in enumerate([(0.4, 1e-1), (0.2, 1e-2), (0.1, 1e-3)], start=1):
        t.add(lv, h, report(e))
    r = t.rates("l2u")
    assert r[0] == pytest.approx(np.log2(10)) and r[-1] is None
    assert t.least_squares_rate("l2u") == pytest.approx(np.log2(10))
    assert t.least_squares_rate("l2u", first_level=2) == pytest.approx(np.log2(10))
    text = t.to_csv()
    assert text.startswith("# config: {}\n")
    rows = list(csv.DictReader(io.StringIO(text.split("\n", 1)[1])))
    assert [r["level"] for r in rows] == ["1", "2", "3"]
    assert rows[-1]["l2u_rate"] == "" and rows[0]["divu_rate"] == "nan"
    assert "level" in t.format()
    with pytest.raises(ValueError):
        t.least_squares_rate("l2u", first_level=3)


def test_error_report_rejects_nan():
    with pytest.raises(ValueError):
        ErrorReport(float("nan"), True, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_interpolant_errors_are_small_for_polynomials():
    m = build_structured_mesh(3, 0.2, 1)
    sol = polynomial_solution(2, 1e-3)
    params = DiscretizationParams()
    V = build_velocity_space(m, 2)
    Q = build_pressure_space(m, 1)
    u, p = interpolate_exact(V, Q, sol, params)
    e = compute_errors(V, Q, u, p, sol, params)
    assert max(e.energy, e.l2u, e.linfu, e.l2p, e.l2p_proj, e.divu) <= 1e-11


def test_study_config_validation_and_header():
    with pytest.raises(ValueError):
        StudyConfig(k=1)
    with pytest.raises(ValueError):
        StudyConfig(problem="nope")
    with pytest.raises(ValueError):
        StudyConfig(convection="sideways")
    c = StudyConfig(levels=2)
    assert c.resolved()["sigma"] == 36.0
    assert c.header().startswith("# config: {")
    assert [m.nt for m in c.meshes()] == [288, 1152]


def test_study_from_mesh_file(tmp_path):
    path = tmp_path / "m.txt"
    write_mesh(build_structured_mesh(3, 0.1, 2), path)
    c = StudyConfig(mesh_file=str(path), levels=2, nu=1.0)
    ms = c.meshes()
    assert ms[1].nt == 4 * ms[0].nt


def test_small_study_converges():
    c = StudyConfig(n0=3, levels=3, nu=1.0)
    seen = []
    t = run_convergence_study(c, on_level=lambda r: seen.append(r.level))
    assert seen == [1, 2, 3]
    assert np.all(np.diff(t.column("energy")) < 0)
    assert t.rates("l2u")[-2] > 2.5
    assert np.all(t.column("divu") <= 1e-8)


def test_study_error_keeps_partial_table(monkeypatch):
    import stenberg_oseen.analysis as analysis

    calls = {"n": 0}
    real = analysis.solve_on_mesh

    def flaky(*a, **kw):
        calls["n"] += 1
        if calls["n"] == 2:
            raise RuntimeError("boom")
        return real(*a, **kw)

    monkeypatch.setattr(analysis, "solve_on_mesh", flaky)
    with pytest.raises(StudyError) as exc:
        run_convergence_study(StudyConfig(n0=2, levels=3, nu=1.0))
    assert exc.value.table.levels == [1]


def test_exactness_single_square():
    r = check_complex_exactness(build_structured_mesh(1), 2)
    assert (r.dim_v, r.dim_z, r.dim_q) == (7, 2, 5)
    assert r.exact and r.dim_v == r.dim_z + r.dim_q


@pytest.mark.parametrize("k", [2, 3])
def test_exactness_perturbed(k):
    r = check_complex_exactness(build_structured_mesh(3, 0.2, 4), k)
    assert r.exact, r.summary()


def test_exactness_lanczos_path_agrees(monkeypatch):
    import stenberg_oseen.analysis as analysis

    m = build_structured_mesh(3, 0.2, 4)
    monkeypatch.setattr(analysis, "DENSE_RANK_LIMIT", 0)
    r = check_complex_exactness(m, 2)
    assert r.method == "lanczos" and r.exact
    bad = check_complex_exactness(m, 2, drop_interior=True)
    assert not bad.exact


def test_exactness_negative_control():
    r = check_complex_exactness(build_structured_mesh(3, 0.2, 4), 2, drop_interior=True)
    assert not r.div_onto and not r.exact


def test_infsup_bounded_on_small_family():
    c = StudyConfig(n0=3, levels=3)
    rep = infsup_study(c.meshes(), 2)
    assert min(rep.beta) > 0.05 and rep.ratio < 2
    assert len(rep.rows()) == 3


@pytest.mark.parametrize("nu", [1e-6, 1.0])
def test_coercivity_quotients(nu):
    q = coercivity_quotients(build_structured_mesh(4, 0.2, 0), benchmark_solution(nu), DiscretizationParams())
    assert q.shape == (100,) and q.min() >= 0.49


def test_pressure_robustness_small():
    # a polynomial potential keeps every quadrature exact, so the identity holds to roundoff
    from stenberg_oseen.problem import X, Y

    r = pressure_robustness_test(StudyConfig(n0=3), phi=X ** 3 * Y - 2 * Y ** 2, level=1)
    assert r.velocity_change <= 1e-8
    assert r.pressure_mismatch <= 1e-6


def test_dof_counts_reference():
    d = dof_comparison(160, 433, 274, 2)
    assert (d.stenberg, d.pressure, d.stenberg_total) == (1575, 822, 2397)
    assert (d.bdm, d.bdm_total) == (2121, 2943)
    assert d.ratio < 1
    with pytest.raises(ValueError):
        dof_comparison(1, 1, 1, 1)


def test_dof_table_matches_spaces():
    c = StudyConfig(n0=2, levels=2)
    for d, m in zip(mesh_dof_table(c), c.meshes()):
        assert d.stenberg == build_velocity_space(m, 2).ndof


def test_solve_on_mesh_without_errors():
    res = solve_on_mesh(build_structured_mesh(2), benchmark_solution(1.0), DiscretizationParams(), errors=False)
    assert res.errors is None and res.report.residual <= 1e-10
