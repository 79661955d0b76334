"""Multilevel dictionary of interior B-splines.

The dictionary is the union over levels ``l0..L`` of the interior tensor
B-spline bases on the uniform level-``l`` knot vectors, each function scaled
to unit H^1(Omega)-seminorm. Atoms are ordered level by level and
lexicographically (C order) in the tensor index within a level.

Atoms are not materialized: each one is a reference ``(level, i_1..i_d)``
into the per-level univariate knot vectors, where ``i_k`` is the 0-based index
in the full univariate basis (interior functions have ``1 <= i_k <= n_l - 2``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryPatch
from .quadrature import QuadratureSpec, contract, default_quadrature, iter_chunks
from .splines import KnotVector, Regularity, basis_matrix, make_open_uniform_knots

__all__ = [
    "TrialDictionary",
    "level_cardinality",
    "dict_cardinality",
    "build_dictionary",
    "eval_trial",
    "export_atoms_csv",
]


def _check_levels(p, l0, L, d):
    if int(p) != p or p < 1:
        raise ValueError(f"degree must be a positive integer, got {p!r}")
    if int(l0) != l0 or l0 < 1:
        raise ValueError(f"l0 must be a positive integer, got {l0!r}")
    if int(L) != L or L <= l0:
        raise ValueError(f"need 1 <= l0 < L, got l0={l0!r}, L={L!r}")
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d!r}")


def level_cardinality(p: int, regularity, level: int, d: int) -> int:
    """Number of interior tensor B-splines on one level."""
    reg = Regularity.parse(regularity)
    per_dir = 2**level + p - 2 if reg is Regularity.CMAX else 2**level * p - 1
    return per_dir**d


def dict_cardinality(p: int, regularity, l0: int, L: int, d: int) -> tuple[int, int]:
    """``(N_dict, N_dof)`` for the dictionary with levels ``l0..L`` in dimension ``d``."""
    _check_levels(p, l0, L, d)
    n_dict = sum(level_cardinality(p, regularity, lev, d) for lev in range(l0, L + 1))
    return n_dict, level_cardinality(p, regularity, L, d)


@dataclass(eq=False)
class TrialDictionary:
    p: int
    regularity: Regularity
    l0: int
    L: int
    geometry: GeometryPatch
    knot_vectors: dict = field(repr=False)
    offsets: dict = field(repr=False)
    atom_level: np.ndarray = field(repr=False)
    atom_index: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def levels(self) -> range:
        return range(self.l0, self.L + 1)

    @property
    def N_dict(self) -> int:
        return int(self.atom_level.size)

    @property
    def N_dof(self) -> int:
        return level_cardinality(self.p, self.regularity, self.L, self.dim)

    def interior_count(self, level: int) -> int:
        return self.knot_vectors[level].n - 2

    def level_slice(self, level: int) -> slice:
        start = self.offsets[level]
        return slice(start, start + self.interior_count(level) ** self.dim)

    def univariate(self, level: int, x, derivative: bool = False) -> np.ndarray:
        """Interior univariate basis (or derivative) of one level at points ``x``: ``(n_l - 2, len(x))``."""
        return basis_matrix(self.knot_vectors[level], x, derivative=derivative)[1:-1]

    def atom(self, j: int):
        """``(level, tensor index, gamma)`` of atom ``j`` (0-based)."""
        if not 0 <= j < self.N_dict:
            raise IndexError(f"atom index {j} out of range [0, {self.N_dict})")
        return int(self.atom_level[j]), tuple(int(i) for i in self.atom_index[j]), float(self.gamma[j])

    def support(self, j: int):
        """Parametric bounding box of atom ``j`` as a list of ``(lo, hi)`` pairs."""
        level, idx, _ = self.atom(j)
        kv = self.knot_vectors[level]
        return [kv.support(i) for i in idx]

    def expansion_grid(self, coefs, axes_points, gradient: bool = True):
        """Value and parametric gradient of ``sum_j coefs[j] psi_j`` on a tensor grid.

        Returns ``(value, grad)`` with shapes ``(Q_1, ..., Q_d)`` and
        ``(Q_1, ..., Q_d, d)``.
        """
        coefs = np.asarray(coefs, dtype=float)
        if coefs.shape != (self.N_dict,):
            raise ValueError(f"expected {self.N_dict} coefficients, got shape {coefs.shape}")
        d = self.dim
        shape = tuple(np.size(a) for a in axes_points)
        value = np.zeros(shape)
        grad = np.zeros(shape + (d,)) if gradient else None
        for lev in self.levels:
            block = coefs[self.level_slice(lev)] / self.gamma[self.level_slice(lev)]
            if not np.any(block):
                continue
            n = self.interior_count(lev)
            Z = block.reshape((n,) * d)
            vals = [self.univariate(lev, a) for a in axes_points]
            value += _apply(Z, vals)
            if gradient:
                ders = [self.univariate(lev, a, derivative=True) for a in axes_points]
                for k in range(d):
                    grad[..., k] += _apply(Z, [ders[i] if i == k else vals[i] for i in range(d)])
        return value, grad


def _apply(Z, mats):
    out = Z
    for k, M in enumerate(mats):
        out = np.moveaxis(np.tensordot(out, M, axes=([k], [0])), -1, k)
    return out


def build_dictionary(p: int, regularity, l0: int, L: int, g: GeometryPatch,
                     quad: QuadratureSpec | None = None) -> TrialDictionary:
    """Enumerate the atoms of the multilevel dictionary and compute their
    H^1(Omega)-seminorms on the physical domain.

    The quadrature mesh must be at least as fine as level ``L`` so that every
    atom is a polynomial on each quadrature element.
    """
    d = g.dim
    _check_levels(p, l0, L, d)
    reg = Regularity.parse(regularity)
    quad = quad or default_quadrature(p, L)
    if quad.mesh_level < L:
        raise ValueError("quadrature mesh must be at least as fine as level L")
    kvs: dict[int, KnotVector] = {}
    offsets: dict[int, int] = {}
    levels, indices = [], []
    start = 0
    for lev in range(l0, L + 1):
        kv = make_open_uniform_knots(lev, p, reg)
        kvs[lev] = kv
        offsets[lev] = start
        n = kv.n - 2
        idx = np.indices((n,) * d).reshape(d, -1).T + 1
        levels.append(np.full(idx.shape[0], lev))
        indices.append(idx)
        start += idx.shape[0]
    dic = TrialDictionary(p, reg, l0, L, g, kvs, offsets, np.concatenate(levels),
                          np.concatenate(indices), np.ones(start))
    dic.gamma = np.sqrt(_seminorms_squared(dic, quad))
    if not np.all(dic.gamma > 0.0):
        raise ValueError("degenerate dictionary atom with zero seminorm")
    return dic


def _seminorms_squared(dic: TrialDictionary, quad: QuadratureSpec) -> np.ndarray:
    d = dic.dim
    out = np.zeros(dic.N_dict)
    for chunk in iter_chunks(dic.geometry, quad):
        G = chunk.metric()
        for lev in dic.levels:
            vals = [dic.univariate(lev, a) for a in chunk.axes]
            ders = [dic.univariate(lev, a, derivative=True) for a in chunk.axes]
            acc = 0.0
            for a in range(d):
                for b in range(d):
                    mats = []
                    for k in range(d):
                        fa = ders[k] if k == a else vals[k]
                        fb = ders[k] if k == b else vals[k]
                        mats.append(fa * fb)
                    acc = acc + contract(G[..., a, b], mats)
            out[dic.level_slice(lev)] += np.ravel(acc)
    return out


def eval_trial(dic: TrialDictionary, j: int, xi):
    """Normalized value and parametric gradient of atom ``j`` at ``xi``.

    Physical gradients follow from ``J^{-T}`` applied to the returned vector.
    """
    level, idx, gamma = dic.atom(j)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != dic.dim:
        raise ValueError(f"expected a point with {dic.dim} coordinates")
    kv = dic.knot_vectors[level]
    vals = np.empty(dic.dim)
    ders = np.empty(dic.dim)
    for k, (i, x) in enumerate(zip(idx, xi)):
        vals[k] = basis_matrix(kv, [x])[i, 0]
        ders[k] = basis_matrix(kv, [x], derivative=True)[i, 0]
    value = np.prod(vals)
    grad = np.array([ders[k] * np.prod(np.delete(vals, k)) for k in range(dic.dim)])
    return value / gamma, grad / gamma


def export_atoms_csv(dic: TrialDictionary, path) -> None:
    """Write ``j, level, i_1..i_d, gamma`` for every atom."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "level"] + [f"i{k + 1}" for k in range(dic.dim)] + ["gamma"])
        for j in range(dic.N_dict):
            w.writerow([j, int(dic.atom_level[j])] + [int(i) for i in dic.atom_index[j]] + [repr(float(dic.gamma[j]))])
