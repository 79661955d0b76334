"""Univariate B-splines on open knot vectors.

Evaluation follows the local Cox-De Boor recursion: at any parameter only the
``p+1`` functions of the active knot span are computed. Everything here is
vectorized over evaluation points; the scalar :func:`eval_basis` is a thin
wrapper kept for convenience and for tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Regularity",
    "KnotVector",
    "BasisEval",
    "make_open_uniform_knots",
    "eval_basis",
    "eval_active",
    "basis_matrix",
    "insert_knot",
    "refine_midpoints",
]


class Regularity(str, Enum):
    """Interior continuity of a uniform spline space."""

    CMAX = "Cmax"  # C^{p-1}, simple interior knots
    C0 = "C0"  # interior knots repeated p times

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        aliases = {"c^{p-1}": cls.CMAX, "cpm1": cls.CMAX, "max": cls.CMAX, "c0": cls.C0}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown regularity {value!r}")


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Open knot vector on [0, 1].

    ``level`` and ``regularity`` are only set for the uniform knot vectors
    produced by :func:`make_open_uniform_knots`; geometry patches use plain
    knot vectors with both left as ``None``.
    """

    knots: np.ndarray
    degree: int
    level: int | None = None
    regularity: Regularity | None = None
    breakpoints: np.ndarray = field(init=False, repr=False)
    multiplicities: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        kn = np.asarray(self.knots, dtype=float)
        p = int(self.degree)
        if p < 1:
            raise ValueError("degree must be >= 1")
        if kn.ndim != 1 or kn.size < 2 * (p + 1):
            raise ValueError("knot vector too short for its degree")
        if np.any(np.diff(kn) < 0):
            raise ValueError("knots must be nondecreasing")
        if kn[0] != 0.0 or kn[-1] != 1.0:
            raise ValueError("knots must start at 0 and end at 1")
        if np.any(kn[: p + 1] != 0.0) or np.any(kn[-(p + 1):] != 1.0):
            raise ValueError("knot vector is not open")
        if kn[p + 1] == 0.0 or kn[-(p + 2)] == 1.0:
            raise ValueError("end knots must have multiplicity exactly p+1")
        bp, mult = np.unique(kn, return_counts=True)
        if np.any(mult[1:-1] > p):
            raise ValueError("interior knot multiplicity exceeds the degree")
        kn.setflags(write=False)
        object.__setattr__(self, "knots", kn)
        object.__setattr__(self, "degree", p)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "multiplicities", mult)

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def num_elements(self) -> int:
        return self.breakpoints.size - 1

    def support(self, i: int) -> tuple[float, float]:
        """Parametric support interval of basis function ``i`` (0-based)."""
        return float(self.knots[i]), float(self.knots[i + self.degree + 1])

    def find_span(self, xi) -> np.ndarray:
        """Index ``k`` with ``knots[k] <= xi < knots[k+1]``; xi=1 goes to the last element."""
        xi = np.asarray(xi, dtype=float)
        span = np.searchsorted(self.knots, xi, side="right") - 1
        return np.clip(span, self.degree, self.n - 1)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "knots": self.knots.tolist()}

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.knots, other.knots)

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))


@dataclass(frozen=True)
class BasisEval:
    """Nonzero basis functions at one parameter value.

    ``values[k]`` and ``derivatives[k]`` belong to basis function
    ``first_index + k``.
    """

    first_index: int
    values: np.ndarray
    derivatives: np.ndarray


def make_open_uniform_knots(level: int, degree: int, regularity="Cmax") -> KnotVector:
    """Open knot vector with ``2**level`` equal elements on [0, 1].

    Interior breakpoints are simple for ``Cmax`` and repeated ``degree`` times
    for ``C0``. The resulting basis has ``2**level + degree`` functions
    (``Cmax``) or ``2**level * degree + 1`` functions (``C0``).
    """
    if int(level) != level or level < 1:
        raise ValueError(f"level must be a positive integer, got {level!r}")
    if int(degree) != degree or degree < 1:
        raise ValueError(f"degree must be a positive integer, got {degree!r}")
    reg = Regularity.parse(regularity)
    level, degree = int(level), int(degree)
    ne = 2**level
    interior = np.arange(1, ne) / ne
    mult = 1 if reg is Regularity.CMAX else degree
    knots = np.concatenate([np.zeros(degree + 1), np.repeat(interior, mult), np.ones(degree + 1)])
    return KnotVector(knots, degree, level=level, regularity=reg)


def eval_active(kv: KnotVector, xi, derivative: bool = True):
    """Vectorized local Cox-De Boor evaluation.

    Returns ``(first, values, derivs)`` where ``first`` has the shape of
    ``xi`` and ``values``/``derivs`` have an extra trailing axis of length
    ``p+1``. ``derivs`` is ``None`` when ``derivative`` is false.
    """
    x = np.asarray(xi, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0) or np.any(np.isnan(x)):
        raise ValueError("evaluation points must lie in [0, 1]")
    shape = x.shape
    x = x.reshape(-1)
    p = kv.degree
    t = kv.knots
    span = kv.find_span(x)
    npts = x.size

    N = np.zeros((npts, p + 1))
    N[:, 0] = 1.0
    left = np.zeros((npts, p + 1))
    right = np.zeros((npts, p + 1))
    prev = None
    for j in range(1, p + 1):
        if j == p:
            prev = N[:, :p].copy()
        left[:, j] = x - t[span + 1 - j]
        right[:, j] = t[span + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = np.divide(N[:, r], denom, out=np.zeros(npts), where=denom != 0.0)
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved

    dN = None
    if derivative:
        # B'_{i,p} = p B_{i,p-1}/(t_{i+p}-t_i) - p B_{i+1,p-1}/(t_{i+p+1}-t_{i+1}), 0/0 = 0
        padded = np.zeros((npts, p + 2))
        padded[:, 1 : p + 1] = prev
        dN = np.empty((npts, p + 1))
        for k in range(p + 1):
            i = span - p + k
            d1 = t[i + p] - t[i]
            d2 = t[i + p + 1] - t[i + 1]
            a = np.divide(padded[:, k], d1, out=np.zeros(npts), where=d1 != 0.0)
            b = np.divide(padded[:, k + 1], d2, out=np.zeros(npts), where=d2 != 0.0)
            dN[:, k] = p * (a - b)
        dN = dN.reshape(shape + (p + 1,))
    return (span - p).reshape(shape), N.reshape(shape + (p + 1,)), dN


def eval_basis(kv: KnotVector, xi: float) -> BasisEval:
    """Values and first derivatives of the ``p+1`` active basis functions at ``xi``."""
    x = float(xi)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"xi={xi!r} outside [0, 1]")
    first, vals, ders = eval_active(kv, np.array([x]))
    return BasisEval(int(first[0]), vals[0], ders[0])


def basis_matrix(kv: KnotVector, xi, derivative: bool = False) -> np.ndarray:
    """Dense ``(n, len(xi))`` matrix of basis values (or first derivatives)."""
    x = np.asarray(xi, dtype=float).reshape(-1)
    first, vals, ders = eval_active(kv, x, derivative=derivative)
    data = ders if derivative else vals
    out = np.zeros((kv.n, x.size))
    cols = np.arange(x.size)
    for k in range(kv.degree + 1):
        out[first + k, cols] = data[:, k]
    return out


def insert_knot(kv: KnotVector, coefs, u: float):
    """Boehm knot insertion: returns the refined knot vector and coefficients.

    ``coefs`` may carry trailing dimensions; the first axis runs over basis
    functions.
    """
    c = np.asarray(coefs, dtype=float)
    p = kv.degree
    t = kv.knots
    k = int(kv.find_span(u))
    new_knots = np.insert(t, k + 1, u)
    new = np.empty((c.shape[0] + 1,) + c.shape[1:])
    new[: k - p + 1] = c[: k - p + 1]
    new[k + 1 :] = c[k:]
    for i in range(k - p + 1, k + 1):
        alpha = (u - t[i]) / (t[i + p] - t[i])
        new[i] = alpha * c[i] + (1.0 - alpha) * c[i - 1]
    return KnotVector(new_knots, p), new


def refine_midpoints(kv: KnotVector, coefs, times: int = 1):
    """Insert every element midpoint (with the knot vector's own interior
    multiplicity) ``times`` times, returning the refined knot vector and
    coefficients. Uniform knot vectors stay uniform, so the result matches
    :func:`make_open_uniform_knots` at ``level + times``.
    """
    c = np.asarray(coefs, dtype=float)
    out_kv = kv
    mult = 1
    if kv.regularity is Regularity.C0:
        mult = kv.degree
    for _ in range(times):
        bp = out_kv.breakpoints
        mids = 0.5 * (bp[:-1] + bp[1:])
        for u in mids:
            for _ in range(mult):
                out_kv, c = insert_knot(out_kv, c, float(u))
    if kv.level is not None:
        out_kv = KnotVector(out_kv.knots, kv.degree, level=kv.level + times, regularity=kv.regularity)
    return out_kv, c
