"""Petrov-Galerkin systems between the spline dictionary and the sine test space.

``B[q, j] = a(psi_j, phi_q)`` and ``c[q] = a(u, phi_q)`` with both families
normalized in the H^1(Omega)-seminorm. The load vector is computed from the
exact gradient; for test functions vanishing on the boundary this equals the
integral of ``f phi_q``.

Three routes produce entries:

* :func:`bilinear_entry` integrates one entry pointwise over the elements in
  the atom's support;
* :func:`assemble_full` contracts all entries level by level, one direction at
  a time;
* :func:`assemble_rows` does the same contraction batched over a list of
  sampled test indices, without ever forming ``B``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.io import mmwrite

from .dictionary import TrialDictionary
from .exact import ExactSolution
from .geometry import GeometryError, GeometryPatch
from .quadrature import MIN_POINTS, QuadratureSpec, contract, iter_chunks
from .splines import basis_matrix
from .testspace import TestBasis, sine_matrices

__all__ = [
    "PGSystem",
    "SubsampledSystem",
    "SamplingError",
    "exact_quadrature",
    "bilinear_entry",
    "assemble_matrix",
    "assemble_load",
    "assemble_full",
    "assemble_rows",
    "assemble_rows_matrix",
    "scaling_factors",
    "scaling_matrix",
    "export_matrix",
    "export_vector",
]


class SamplingError(ValueError):
    """A drawn test index has zero sampling probability."""


@dataclass
class PGSystem:
    B: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.B.shape


@dataclass
class SubsampledSystem:
    """Rows ``tau`` of the full system plus the diagonal of the scaling ``E``."""

    A: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    e: np.ndarray = field(repr=False)
    tau: np.ndarray
    pi: np.ndarray = field(repr=False)

    @property
    def E(self) -> np.ndarray:
        return np.diag(self.e)

    @property
    def m(self) -> int:
        return int(self.tau.size)


def exact_quadrature(p: int, L: int, exact: ExactSolution | None = None) -> QuadratureSpec:
    """Rule for integrals involving the exact solution (load vector, errors).

    Uses the level-L mesh unless the solution has a feature that needs a
    finer one.
    """
    level = L if exact is None else max(L, exact.resolution_level)
    return QuadratureSpec(max(p + 1, MIN_POINTS), level)


def _check_index(j, q, dic, tb):
    if not 0 <= j < dic.N_dict:
        raise IndexError(f"atom index {j} out of range")
    if not 0 <= q < tb.N_test:
        raise IndexError(f"test index {q} out of range")


def bilinear_entry(dic: TrialDictionary, tb: TestBasis, g: GeometryPatch,
                   quad: QuadratureSpec, j: int, q: int) -> float:
    """``a(psi_j, phi_q)`` by quadrature restricted to the support of atom ``j``."""
    _check_index(j, q, dic, tb)
    level, idx, gamma = dic.atom(j)
    kv = dic.knot_vectors[level]
    r = tb.multi_index(q)
    x1, w1 = quad.nodes_1d()
    axes, weights, trial_v, trial_d, test_v, test_d = [], [], [], [], [], []
    for k, i in enumerate(idx):
        lo, hi = kv.support(i)
        sel = (x1 > lo) & (x1 < hi)
        xs = x1[sel]
        axes.append(xs)
        weights.append(w1[sel])
        trial_v.append(basis_matrix(kv, xs)[i])
        trial_d.append(basis_matrix(kv, xs, derivative=True)[i])
        test_v.append(np.sin(r[k] * np.pi * xs))
        test_d.append(r[k] * np.pi * np.cos(r[k] * np.pi * xs))
    _, J = g.eval_grid(axes)
    det = np.linalg.det(J)
    if not np.all(det > 0.0):
        raise GeometryError("nonpositive Jacobian determinant at a quadrature point")
    Jinv = np.linalg.inv(J)
    d = g.dim
    grids_tv = np.meshgrid(*trial_v, indexing="ij")
    grids_td = np.meshgrid(*trial_d, indexing="ij")
    grids_sv = np.meshgrid(*test_v, indexing="ij")
    grids_sd = np.meshgrid(*test_d, indexing="ij")
    w = np.prod(np.meshgrid(*weights, indexing="ij"), axis=0)
    gpsi = np.stack([np.prod([grids_td[k] if k == a else grids_tv[k] for k in range(d)], axis=0)
                     for a in range(d)], axis=-1)
    gphi = np.stack([np.prod([grids_sd[k] if k == a else grids_sv[k] for k in range(d)], axis=0)
                     for a in range(d)], axis=-1)
    # physical gradients J^{-T} grad_hat
    ppsi = np.einsum("...ka,...k->...a", Jinv, gpsi)
    pphi = np.einsum("...ka,...k->...a", Jinv, gphi)
    val = np.sum(np.sum(ppsi * pphi, axis=-1) * det * w)
    return float(val / (gamma * tb.norms[q]))


def _pair_factors(d, a, b, tv, td, sv, sd):
    """Per-axis trial and test factors for derivative directions ``a`` (trial) and ``b`` (test)."""
    return ([td[k] if k == a else tv[k] for k in range(d)],
            [sd[k] if k == b else sv[k] for k in range(d)])


def assemble_matrix(dic: TrialDictionary, tb: TestBasis, g: GeometryPatch,
                    quad: QuadratureSpec) -> np.ndarray:
    """Dense normalized ``B`` of shape ``(N_test, N_dict)``."""
    d, R = dic.dim, tb.R
    B = np.zeros((tb.N_test, dic.N_dict))
    for chunk in iter_chunks(g, quad):
        G = chunk.metric()
        tabs = [sine_matrices(R, a) for a in chunk.axes]
        sv = [t[0] for t in tabs]
        sd = [t[1] for t in tabs]
        for lev in dic.levels:
            n = dic.interior_count(lev)
            tv = [dic.univariate(lev, a) for a in chunk.axes]
            td = [dic.univariate(lev, a, derivative=True) for a in chunk.axes]
            acc = 0.0
            for a in range(d):
                for b in range(d):
                    U, V = _pair_factors(d, a, b, tv, td, sv, sd)
                    mats = [(U[k][:, None, :] * V[k][None, :, :]).reshape(n * R, -1) for k in range(d)]
                    acc = acc + contract(G[..., a, b], mats)
            # axes (i1, r1, i2, r2, ...) -> (r1..rd, i1..id)
            blk = np.reshape(acc, sum(((n, R) for _ in range(d)), ()))
            blk = np.transpose(blk, [2 * k + 1 for k in range(d)] + [2 * k for k in range(d)])
            B[:, dic.level_slice(lev)] += blk.reshape(R**d, n**d)
    B /= tb.norms[:, None]
    B /= dic.gamma[None, :]
    return B


def _exact_field(chunk, exact: ExactSolution):
    # w |det J| J^{-1} grad u, so that sum_x field . grad_hat(phi) = a(u, phi)
    grad = exact.gradient(chunk.x)
    return chunk.wdet[..., None] * np.einsum("...ak,...k->...a", chunk.jinv, grad)


def assemble_load(tb: TestBasis, g: GeometryPatch, quad: QuadratureSpec,
                  exact: ExactSolution, tau=None) -> np.ndarray:
    """Normalized load vector ``a(u, phi_q)``, for all ``q`` or only those in ``tau``."""
    d, R = g.dim, tb.R
    if exact.dim != d:
        raise ValueError("exact solution and geometry dimensions differ")
    if tau is None:
        out = np.zeros((R,) * d)
        for chunk in iter_chunks(g, quad):
            H = _exact_field(chunk, exact)
            tabs = [sine_matrices(R, a) for a in chunk.axes]
            for b in range(d):
                out += contract(H[..., b], [tabs[k][1] if k == b else tabs[k][0] for k in range(d)])
        return out.ravel() / tb.norms
    tau = np.asarray(tau, dtype=int)
    r = tb.multi_index(tau)
    out = np.zeros(tau.size)
    for chunk in iter_chunks(g, quad):
        H = _exact_field(chunk, exact)
        for b in range(d):
            facs = []
            for k, a in enumerate(chunk.axes):
                arg = np.pi * r[:, k][:, None] * a[None, :]
                facs.append(np.pi * r[:, k][:, None] * np.cos(arg) if k == b else np.sin(arg))
            out += _batched_contract(H[..., b], [f[:, None, :] for f in facs])[(slice(None),) + (0,) * d]
    return out / tb.norms[tau]


def _batched_contract(field, mats):
    """``out[m, i_1..i_d] = sum_x field[x] prod_k mats[k][m, i_k, x_k]``."""
    d = field.ndim
    m = mats[0].shape[0]
    Q = field.shape
    out = (mats[0] @ field.reshape(Q[0], -1)).reshape((m, mats[0].shape[1]) + Q[1:])
    letters = "abcdefgh"
    for k in range(1, d):
        done = letters[:k]
        rest = "xyz"[: d - k]
        out = np.einsum(f"m{done}{rest},mj{rest[0]}->m{done}j{rest[1:]}", out, mats[k])
    return out


def assemble_rows_matrix(dic: TrialDictionary, tb: TestBasis, g: GeometryPatch,
                         quad: QuadratureSpec, tau) -> np.ndarray:
    """Rows ``tau`` of the normalized ``B`` (duplicates allowed)."""
    tau = np.asarray(tau, dtype=int).reshape(-1)
    d = dic.dim
    r = tb.multi_index(tau)
    A = np.zeros((tau.size, dic.N_dict))
    for chunk in iter_chunks(g, quad):
        G = chunk.metric()
        sv, sd = [], []
        for k, a in enumerate(chunk.axes):
            arg = np.pi * r[:, k][:, None] * a[None, :]
            sv.append(np.sin(arg))
            sd.append(np.pi * r[:, k][:, None] * np.cos(arg))
        for lev in dic.levels:
            n = dic.interior_count(lev)
            tv = [dic.univariate(lev, a) for a in chunk.axes]
            td = [dic.univariate(lev, a, derivative=True) for a in chunk.axes]
            acc = 0.0
            for a in range(d):
                for b in range(d):
                    U, V = _pair_factors(d, a, b, tv, td, sv, sd)
                    mats = [U[k][None, :, :] * V[k][:, None, :] for k in range(d)]
                    acc = acc + _batched_contract(G[..., a, b], mats)
            A[:, dic.level_slice(lev)] += np.reshape(acc, (tau.size, n**d))
    A /= tb.norms[tau][:, None]
    A /= dic.gamma[None, :]
    return A


def assemble_full(dic: TrialDictionary, tb: TestBasis, g: GeometryPatch, quad: QuadratureSpec,
                  exact: ExactSolution, rhs_quad: QuadratureSpec | None = None) -> PGSystem:
    """Full system ``(B, c)``. ``rhs_quad`` defaults to :func:`exact_quadrature`."""
    rhs_quad = rhs_quad or exact_quadrature(dic.p, dic.L, exact)
    return PGSystem(assemble_matrix(dic, tb, g, quad), assemble_load(tb, g, rhs_quad, exact))


def scaling_factors(pi, tau) -> np.ndarray:
    """Diagonal of ``E``: ``1 / sqrt(m pi[tau_i])``."""
    pi = np.asarray(pi, dtype=float)
    tau = np.asarray(tau, dtype=int).reshape(-1)
    pt = pi[tau]
    if np.any(pt <= 0.0):
        raise SamplingError("a sampled test index has zero probability")
    return 1.0 / np.sqrt(tau.size * pt)


def scaling_matrix(pi, tau) -> np.ndarray:
    return np.diag(scaling_factors(pi, tau))


def assemble_rows(dic: TrialDictionary, tb: TestBasis, g: GeometryPatch, quad: QuadratureSpec,
                  exact: ExactSolution, tau, pi=None,
                  rhs_quad: QuadratureSpec | None = None) -> SubsampledSystem:
    """Subsampled system for test indices ``tau``; ``pi`` defaults to uniform."""
    tau = np.asarray(tau, dtype=int).reshape(-1)
    if tau.size == 0:
        raise ValueError("need at least one test index")
    if np.any(tau < 0) or np.any(tau >= tb.N_test):
        raise IndexError("test index out of range")
    pi = np.full(tb.N_test, 1.0 / tb.N_test) if pi is None else np.asarray(pi, dtype=float)
    rhs_quad = rhs_quad or exact_quadrature(dic.p, dic.L, exact)
    A = assemble_rows_matrix(dic, tb, g, quad, tau)
    b = assemble_load(tb, g, rhs_quad, exact, tau=tau)
    return SubsampledSystem(A, b, scaling_factors(pi, tau), tau, pi)


def export_matrix(M, path, comment: str = "") -> None:
    """Matrix Market array (dense) format."""
    mmwrite(str(path), np.atleast_2d(np.asarray(M, dtype=float)), comment=comment, field="real")


def export_vector(v, path, header: str = "value") -> None:
    v = np.asarray(v, dtype=float).reshape(-1)
    with open(path, "w") as fh:
        fh.write(f"i,{header}\n")
        for i, x in enumerate(v):
            fh.write(f"{i},{x!r}\n")
