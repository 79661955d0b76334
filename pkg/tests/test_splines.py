import numpy as np
import pytest
from hypothesis import given, strategies as st
from math import comb
from scipy.interpolate import BSpline

from cossiga.splines import (
    KnotVector,
    Regularity,
    basis_matrix,
    eval_active,
    eval_basis,
    make_open_uniform_knots,
    refine_midpoints,
)

levels = st.integers(1, 5)
degrees = st.integers(1, 5)
regs = st.sampled_from(["Cmax", "C0"])
unit = st.floats(0.0, 1.0)


def test_linear_level_one_knots():
    kv = make_open_uniform_knots(1, 1, "Cmax")
    np.testing.assert_array_equal(kv.knots, [0, 0, 0.5, 1, 1])
    assert kv.n == 3


def test_bernstein_single_element():
    kv = KnotVector(np.array([0, 0, 0, 1, 1, 1.0]), 2)
    ev = eval_basis(kv, 0.5)
    assert ev.first_index == 0
    np.testing.assert_allclose(ev.values, [0.25, 0.5, 0.25], atol=1e-15)


@given(st.integers(1, 6), unit)
def test_bernstein_matches_binomial(p, x):
    kv = KnotVector(np.r_[np.zeros(p + 1), np.ones(p + 1)], p)
    B = basis_matrix(kv, [x])[:, 0]
    ref = [comb(p, i) * x**i * (1 - x) ** (p - i) for i in range(p + 1)]
    np.testing.assert_allclose(B, ref, atol=1e-13)


@pytest.mark.parametrize("level,p,reg,n", [(3, 2, "C0", 17), (5, 2, "Cmax", 34), (2, 3, "C0", 13), (4, 1, "Cmax", 17)])
def test_basis_counts(level, p, reg, n):
    assert make_open_uniform_knots(level, p, reg).n == n


@pytest.mark.parametrize("bad", [0, -1, 1.5])
def test_nonpositive_level_rejected(bad):
    with pytest.raises(ValueError):
        make_open_uniform_knots(bad, 2)


def test_non_open_knots_rejected():
    with pytest.raises(ValueError):
        KnotVector(np.array([0, 0, 0.5, 1, 1, 1.0]), 2)
    with pytest.raises(ValueError):
        KnotVector(np.array([0, 0.2, 0.5, 1.0]), 1)


def test_out_of_range_point_rejected():
    kv = make_open_uniform_knots(2, 2)
    with pytest.raises(ValueError):
        basis_matrix(kv, [1.2])


@given(levels, degrees, regs, st.lists(unit, min_size=1, max_size=20))
def test_partition_of_unity(level, p, reg, xs):
    B = basis_matrix(make_open_uniform_knots(level, p, reg), xs)
    np.testing.assert_allclose(B.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(B >= -1e-14)


@given(levels, degrees, regs, st.lists(unit, min_size=1, max_size=20))
def test_derivatives_sum_to_zero(level, p, reg, xs):
    dB = basis_matrix(make_open_uniform_knots(level, p, reg), xs, derivative=True)
    np.testing.assert_allclose(dB.sum(axis=0), 0.0, atol=1e-10 * max(1.0, np.abs(dB).max()))


@given(levels, degrees, regs)
def test_matches_scipy_design_matrix(level, p, reg):
    kv = make_open_uniform_knots(level, p, reg)
    x = np.linspace(0, 1, 37)[:-1]
    ref = BSpline.design_matrix(x, kv.knots, p).toarray().T
    np.testing.assert_allclose(basis_matrix(kv, x), ref, atol=1e-13)


@given(levels, st.integers(2, 4), regs)
def test_derivative_matches_finite_differences(level, p, reg):
    kv = make_open_uniform_knots(level, p, reg)
    # stay off the breakpoints where C0 derivatives jump
    x = (np.arange(2**level) + 0.37) / 2**level
    h = 1e-6
    fd = (basis_matrix(kv, x + h) - basis_matrix(kv, x - h)) / (2 * h)
    np.testing.assert_allclose(basis_matrix(kv, x, derivative=True), fd, atol=1e-5 * 2**level)


@given(levels, degrees, regs)
def test_local_support(level, p, reg):
    kv = make_open_uniform_knots(level, p, reg)
    x = np.linspace(0, 1, 101)
    B = basis_matrix(kv, x)
    for i in range(kv.n):
        lo, hi = kv.support(i)
        outside = (x < lo) | (x > hi)
        assert np.all(B[i, outside] == 0.0)


def test_endpoint_belongs_to_last_element():
    kv = make_open_uniform_knots(2, 2)
    first, vals, _ = eval_active(kv, np.array([1.0]))
    assert first[0] == kv.n - 3
    assert vals[0, -1] == pytest.approx(1.0)


@given(st.integers(1, 4), degrees, regs, st.integers(1, 2), st.integers(0, 2**31 - 1))
def test_span_nesting(level, p, reg, times, seed):
    kv = make_open_uniform_knots(level, p, reg)
    c = np.random.default_rng(seed).standard_normal(kv.n)
    fine_kv, fine_c = refine_midpoints(kv, c, times)
    assert fine_kv == make_open_uniform_knots(level + times, p, reg)
    x = np.random.default_rng(seed + 1).random(25)
    np.testing.assert_allclose(basis_matrix(fine_kv, x).T @ fine_c, basis_matrix(kv, x).T @ c, atol=1e-10)


def test_regularity_parse():
    assert Regularity.parse("cmax") is Regularity.CMAX
    assert Regularity.parse("C0") is Regularity.C0
    with pytest.raises(ValueError):
        Regularity.parse("C7")
