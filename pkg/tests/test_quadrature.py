import numpy as np
import pytest
from hypothesis import given, strategies as st

from cossiga.geometry import quarter_annulus, unit_cube
from cossiga.quadrature import QuadratureSpec, contract, default_quadrature, iter_chunks


@given(st.integers(1, 8), st.integers(0, 4))
def test_polynomial_exactness(q, level):
    x, w = QuadratureSpec(q, level).nodes_1d()
    for k in range(2 * q):
        assert np.dot(w, x**k) == pytest.approx(1.0 / (k + 1), abs=1e-13)


def test_nodes_inside_elements():
    x, w = QuadratureSpec(3, 2).nodes_1d()
    assert x.size == 12 and np.all(np.diff(x) > 0) and np.all(w > 0)
    assert np.all((x > 0) & (x < 1))


def test_default_rule():
    assert default_quadrature(2, 5).points == 6
    assert default_quadrature(6, 5).points == 7


def test_contract_matches_einsum(rng):
    f = rng.standard_normal((4, 5, 6))
    mats = [rng.standard_normal((3, 4)), rng.standard_normal((2, 5)), rng.standard_normal((7, 6))]
    ref = np.einsum("abc,ia,jb,kc->ijk", f, *mats)
    np.testing.assert_allclose(contract(f, mats), ref, atol=1e-12)


def test_chunking_does_not_change_integrals():
    g = unit_cube()
    quad = QuadratureSpec(3, 2)
    f = lambda x: np.sum(x**2, axis=-1)
    whole = sum(float(np.sum(c.wdet * f(c.x))) for c in iter_chunks(g, quad))
    pieces = list(iter_chunks(g, quad, max_points=50))
    assert len(pieces) > 1
    split = sum(float(np.sum(c.wdet * f(c.x))) for c in pieces)
    assert split == pytest.approx(whole, rel=1e-13)
    assert whole == pytest.approx(1.0, rel=1e-13)


def test_annulus_second_moment():
    # integral of |x|^2 over the quarter annulus = (pi/2)(2^4 - 1)/4
    tot = sum(float(np.sum(c.wdet * np.sum(c.x**2, axis=-1))) for c in iter_chunks(quarter_annulus(), QuadratureSpec(5, 3)))
    assert tot == pytest.approx(np.pi / 2 * 15 / 4, rel=1e-12)
