import csv

import numpy as np
import pytest

from cossiga.dictionary import build_dictionary
from cossiga.exact import ExactSolution
from cossiga.experiments import (
    InvalidExactSolution,
    Problem,
    RunRecord,
    calibrate_C,
    calibrate_D,
    default_s_tested,
    fit_through_origin,
    h1_relative_error,
    run_method,
    select_sparsity,
    study_levels,
    summarize_runs,
    write_runs_csv,
)
from cossiga.geometry import unit_square
from cossiga.quadrature import QuadratureSpec


@pytest.fixture(scope="module")
def small():
    return Problem("polygauss2d", 2, "Cmax", 3)


def test_zero_coefficients_give_unit_error(small):
    assert small.error(np.zeros(small.N_dict)) == pytest.approx(1.0, rel=1e-12)
    assert h1_relative_error(np.zeros(small.N_dict), small.dictionary, small.geometry, small.exact) == pytest.approx(1.0)


def test_cached_error_matches_direct(small, rng):
    z = rng.standard_normal(small.N_dict) * 0.1
    direct = h1_relative_error(z, small.dictionary, small.geometry, small.exact, small.rhs_quad)
    assert small.error(z) == pytest.approx(direct, rel=1e-12)


def test_representable_solution_has_tiny_error(rng):
    g = unit_square()
    dic = build_dictionary(2, "Cmax", 1, 3, g)
    z = rng.standard_normal(dic.N_dict)

    def value(x):
        shp = x.shape[:-1]
        pts = x.reshape(-1, 2)
        out = np.array([dic.expansion_grid(z, [p[:1], p[1:]])[0].item() for p in pts])
        return out.reshape(shp)

    def gradient(x):
        shp = x.shape[:-1]
        pts = x.reshape(-1, 2)
        out = np.array([dic.expansion_grid(z, [p[:1], p[1:]])[1][0, 0] for p in pts])
        return out.reshape(shp + (2,))

    ex = ExactSolution("spline", 2, value, gradient)
    # a least-squares projection of the same function onto a redundant dictionary
    z2 = z.copy()
    z2[: dic.offsets[2]] = 0.0
    assert h1_relative_error(z, dic, g, ex, QuadratureSpec(3, 3)) <= 1e-8
    assert h1_relative_error(z2, dic, g, ex, QuadratureSpec(3, 3)) > 1e-3


def test_zero_exact_seminorm_rejected():
    g = unit_square()
    dic = build_dictionary(1, "Cmax", 1, 2, g)
    zero = ExactSolution("zero", 2, lambda x: np.zeros(x.shape[:-1]), lambda x: np.zeros(x.shape))
    with pytest.raises(InvalidExactSolution):
        h1_relative_error(np.zeros(dic.N_dict), dic, g, zero)


def test_reference_solvers(small):
    bs, e_bs = run_method("pg_bs", small)
    assert bs.n_comp == small.N_dict
    errs = []
    for s in range(1, 40, 3):
        sol, e = run_method("pg-omp", small, s=s)
        assert sol.n_comp == s
        assert e_bs <= e + 1e-10
        errs.append(e)
    assert np.all(np.diff(errs) <= 1e-10)


def test_cossiga_approaches_pg_omp_with_many_rows(small):
    s = 6
    _, e_omp = small.pg_omp(s)
    errs = [small.cossiga(s, small.N_test, seed)[1] for seed in range(5)]
    assert np.median(errs) <= 1.5 * e_omp


def test_rows_modes_agree(small):
    a, ea = small.cossiga(5, 40, 3, rows="assemble")
    b, eb = small.cossiga(5, 40, 3, rows="full")
    assert a.support == b.support
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-10)


def test_run_method_validation(small):
    with pytest.raises(ValueError):
        run_method("cossiga", small, s=3)
    with pytest.raises(ValueError):
        run_method("galerkin", small)


def test_summary_statistics():
    st = summarize_runs([3.0] * 7)
    assert all(v == 3.0 for v in st.percentiles.values())
    st = summarize_runs(np.arange(1, 101))
    assert st.median == pytest.approx(50.5)
    vals = np.sort(np.random.default_rng(0).random(25))
    st = summarize_runs(vals)
    # linear rule: position 0.25 * 24 = 6 (0-based), i.e. the 7th order statistic
    assert st.percentiles[25.0] == pytest.approx(vals[6])
    pct = list(st.percentiles.values())
    assert pct == sorted(pct)
    with pytest.raises(ValueError):
        summarize_runs([])


def test_outliers():
    st = summarize_runs(list(range(100)) + [1000.0])
    assert 1000.0 in st.outliers and 50 not in st.outliers


def test_selection_and_fit():
    assert select_sparsity([4, 8, 16], [0.5, 0.2, 0.2], 0.2) == 8
    assert select_sparsity([16, 8, 4], [0.1, 0.3, 0.5], 0.31) == 8
    assert fit_through_origin([10], [50]) == 5.0
    assert fit_through_origin([1, 2], [2, 4]) == 2.0


def test_default_s_grid():
    grid = default_s_tested()
    assert grid[0] == 4 and grid[-1] == 2048
    assert grid[:8] == [4, 5, 6, 7, 8, 10, 12, 14]
    assert len(grid) == len(set(grid))


@pytest.mark.parametrize("L,D,n_dof,rate", [(4, 3.19, 256, 0.051), (5, 6.38, 1024, 0.102), (6, 6.42, 4096, 0.103)])
def test_published_subsampling_rates(L, D, n_dof, rate):
    s, m = study_levels(1.6e-2, D, n_dof)
    assert m / n_dof == pytest.approx(rate, abs=1e-3)


def test_lambda_and_cap():
    _, m1 = study_levels(0.01, 5.0, 10_000)
    _, m2 = study_levels(0.01, 5.0, 10_000, lam=2.0)
    assert m2 == 4 * m1
    s, m = study_levels(0.1, 9.0, 1000, lam=3.0)
    assert m == 800 and s == 300
    with pytest.raises(ValueError):
        study_levels(0.01, 5.0, 100, lam=0.5)


def test_calibrations_small(small):
    res = calibrate_C("polygauss2d", 2, "Cmax", 3, 2.0, S_tested=[2, 4, 8, 16], problem=small)
    assert res.C * small.N_dof in (2, 4, 8, 16)
    with pytest.raises(ValueError):
        calibrate_C("polygauss2d", 2, "Cmax", 3, 0.5, problem=small)
    d = calibrate_D("polygauss2d", 2, "Cmax", 3, 2.0, s_values=[2, 4], m_grid=[4, 8, 16, 32, 64], n_runs=3,
                    problem=small)
    assert d.D >= 1.0
    assert all(s <= m for s, m in d.picks)


def test_runs_csv(tmp_path):
    rec = RunRecord(0, 7, "cossiga", "gauss2d", 2, "Cmax", 1, 5, 16, 100, 16, 100 / 1024, 0.25)
    write_runs_csv([rec], tmp_path / "runs.csv")
    rows = list(csv.reader(open(tmp_path / "runs.csv")))
    assert rows[0][:3] == ["run_id", "seed", "method"]
    assert rows[1][-1] == "0.25"
