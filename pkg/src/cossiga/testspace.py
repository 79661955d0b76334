"""Sine test functions ``prod_k sin(r_k pi xi_k)`` pulled to the physical domain."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryPatch
from .quadrature import QuadratureSpec, contract, iter_chunks
from .splines import Regularity

__all__ = ["TestBasis", "choose_R", "eval_test", "sine_matrices", "build_test_basis"]


def choose_R(p: int, regularity, L: int) -> int:
    """Maximum test frequency per direction: 1.5 times the level-L interior count, rounded up."""
    reg = Regularity.parse(regularity)
    if p < 1 or L < 1:
        raise ValueError("need p >= 1 and L >= 1")
    n = 2**L + p - 2 if reg is Regularity.CMAX else 2**L * p - 1
    return math.ceil(1.5 * n)


def eval_test(r, xi):
    """Value and parametric gradient of the unnormalized sine with frequencies ``r``."""
    r = np.asarray(r, dtype=float).reshape(-1)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if r.size != xi.size:
        raise ValueError("frequency and point dimensions differ")
    if np.any(r < 1):
        raise ValueError("frequencies must be >= 1")
    s = np.sin(r * np.pi * xi)
    c = r * np.pi * np.cos(r * np.pi * xi)
    grad = np.array([c[k] * np.prod(np.delete(s, k)) for k in range(r.size)])
    return float(np.prod(s)), grad


def sine_matrices(R: int, x):
    """``(R, len(x))`` tables of ``sin(r pi x)`` and ``r pi cos(r pi x)`` for ``r = 1..R``."""
    r = np.arange(1, R + 1, dtype=float)[:, None]
    arg = np.pi * r * np.asarray(x, dtype=float)[None, :]
    return np.sin(arg), np.pi * r * np.cos(arg)


@dataclass(eq=False)
class TestBasis:
    """Sines with frequencies in ``[R]^d``, row ``q`` <-> lexicographic multi-index ``r``."""

    R: int
    d: int
    norms: np.ndarray = field(repr=False)

    __test__ = False  # not a pytest class

    @property
    def N_test(self) -> int:
        return self.R**self.d

    def multi_index(self, q) -> np.ndarray:
        """Frequencies ``r`` (entries in ``1..R``) of 0-based test indices ``q``."""
        q = np.asarray(q)
        if np.any(q < 0) or np.any(q >= self.N_test):
            raise IndexError("test index out of range")
        return np.stack(np.unravel_index(q, (self.R,) * self.d), axis=-1) + 1

    def index(self, r) -> np.ndarray:
        r = np.asarray(r)
        return np.ravel_multi_index(tuple(np.moveaxis(r - 1, -1, 0)), (self.R,) * self.d)


def build_test_basis(R: int, g: GeometryPatch, quad: QuadratureSpec) -> TestBasis:
    """Test basis with H^1(Omega)-seminorms of every sine computed by quadrature."""
    if R < 1:
        raise ValueError("R must be >= 1")
    d = g.dim
    sq = np.zeros((R,) * d)
    for chunk in iter_chunks(g, quad):
        G = chunk.metric()
        tabs = [sine_matrices(R, a) for a in chunk.axes]
        for a in range(d):
            for b in range(d):
                mats = []
                for k in range(d):
                    s, ds = tabs[k]
                    mats.append((ds if k == a else s) * (ds if k == b else s))
                sq += contract(G[..., a, b], mats)
    norms = np.sqrt(sq.ravel())
    if not np.all(norms > 0.0):
        raise ValueError("zero test-function seminorm; quadrature too coarse")
    return TestBasis(R, d, norms)
