import numpy as np
import pytest
from scipy.io import mmread

from cossiga.assembly import (
    SamplingError,
    assemble_full,
    assemble_load,
    assemble_rows,
    bilinear_entry,
    export_matrix,
    scaling_factors,
    scaling_matrix,
)
from cossiga.coherence import draw_test_indices, sampling_distribution


def test_matrix_matches_entrywise_integration(annulus_p1):
    s = annulus_p1
    B = s.system.B
    assert B.shape == (s.tb.N_test, s.dic.N_dict)
    for j in range(s.dic.N_dict):
        for q in range(s.tb.N_test):
            assert B[q, j] == pytest.approx(bilinear_entry(s.dic, s.tb, s.g, s.quad, j, q), abs=1e-12)


def test_entrywise_spot_checks_p2(annulus_p2, rng):
    s = annulus_p2
    B = s.system.B
    for j, q in zip(rng.integers(0, s.dic.N_dict, 15), rng.integers(0, s.tb.N_test, 15)):
        assert B[q, j] == pytest.approx(bilinear_entry(s.dic, s.tb, s.g, s.quad, j, q), abs=1e-12)


def test_rows_equal_full_rows(annulus_p2, rng):
    s = annulus_p2
    tau = rng.integers(0, s.tb.N_test, 30)
    tau[3] = tau[4]  # a repeated draw
    sub = assemble_rows(s.dic, s.tb, s.g, s.quad, s.exact, tau)
    np.testing.assert_allclose(sub.A, s.system.B[tau], atol=1e-12)
    np.testing.assert_allclose(sub.b, s.system.c[tau], atol=1e-12)


def test_load_of_a_single_sine_mode(square_p2):
    # u = sin(pi x) sin(pi y) is the unnormalized first test function
    c = square_p2.system.c
    ref = np.zeros_like(c)
    ref[0] = np.pi / np.sqrt(2.0)
    np.testing.assert_allclose(c, ref, atol=1e-8)


def test_load_subset_matches_full(annulus_p2):
    s = annulus_p2
    from cossiga.assembly import exact_quadrature
    quad = exact_quadrature(s.dic.p, s.dic.L, s.exact)
    tau = np.array([5, 0, 5, 17])
    np.testing.assert_allclose(assemble_load(s.tb, s.g, quad, s.exact, tau=tau), s.system.c[tau], atol=1e-13)


def test_scaling_formula():
    pi = np.array([0.1, 0.2, 0.3, 0.4])
    tau = np.array([0, 3, 3])
    e = scaling_factors(pi, tau)
    assert np.all(e == 1.0 / np.sqrt(3 * pi[tau]))
    np.testing.assert_array_equal(scaling_matrix(pi, tau), np.diag(e))


def test_zero_probability_draw_rejected():
    with pytest.raises(SamplingError):
        scaling_factors(np.array([0.5, 0.5, 0.0]), np.array([2]))


def test_out_of_range_rows(annulus_p1):
    s = annulus_p1
    with pytest.raises(IndexError):
        assemble_rows(s.dic, s.tb, s.g, s.quad, s.exact, [s.tb.N_test])


def test_unbiased_scaling_monte_carlo(annulus_p1):
    s = annulus_p1
    B = s.system.B
    dens = sampling_distribution(s.R, s.dic.L, 2)
    m, draws = 25, 200
    acc = np.zeros((B.shape[1],) * 2)
    for k in range(draws):
        tau = draw_test_indices(dens, m, 1000 + k)
        EA = scaling_factors(dens.pi, tau)[:, None] * B[tau]
        acc += EA.T @ EA
    acc /= draws
    BtB = B.T @ B
    assert np.linalg.norm(acc - BtB) <= 0.05 * np.linalg.norm(BtB)


def test_export_matrix_round_trip(tmp_path, rng):
    M = rng.standard_normal((4, 3))
    export_matrix(M, tmp_path / "M.mtx")
    np.testing.assert_allclose(mmread(str(tmp_path / "M.mtx")), M, rtol=1e-15)


def test_entries_bounded_by_cauchy_schwarz(annulus_p2):
    assert np.abs(annulus_p2.system.B).max() <= 1 + 1e-8


def test_central_hat_against_even_sine_vanishes():
    from cossiga.dictionary import build_dictionary
    from cossiga.geometry import unit_square
    from cossiga.quadrature import default_quadrature
    from cossiga.testspace import build_test_basis

    g = unit_square()
    quad = default_quadrature(1, 2)
    dic = build_dictionary(1, "Cmax", 1, 2, g, quad)
    tb = build_test_basis(4, g, quad)
    assert dic.atom(0)[:2] == (1, (1, 1))
    assert abs(bilinear_entry(dic, tb, g, quad, 0, int(tb.index([2, 2])))) < 1e-10


def test_entries_match_refined_quadrature(annulus_p2, rng):
    from cossiga.quadrature import QuadratureSpec

    s = annulus_p2
    fine = QuadratureSpec(15, s.quad.mesh_level)
    for j, q in zip(rng.integers(0, s.dic.N_dict, 8), rng.integers(0, s.tb.N_test, 8)):
        ref = bilinear_entry(s.dic, s.tb, s.g, fine, j, q)
        assert s.system.B[q, j] == pytest.approx(ref, rel=1e-6, abs=1e-12)


def test_scaling_examples():
    np.testing.assert_array_equal(scaling_matrix(np.array([1.0]), [0]), [[1.0]])
    np.testing.assert_allclose(scaling_factors(np.full(16, 1 / 16), [0, 3, 3, 15]), 2.0)


def test_row_independence(annulus_p2):
    s = annulus_p2
    t1, t2 = [4, 9, 4], [30, 1]
    a = assemble_rows(s.dic, s.tb, s.g, s.quad, s.exact, t1 + t2)
    b1 = assemble_rows(s.dic, s.tb, s.g, s.quad, s.exact, t1)
    b2 = assemble_rows(s.dic, s.tb, s.g, s.quad, s.exact, t2)
    np.testing.assert_allclose(a.A, np.vstack([b1.A, b2.A]), atol=1e-14)
